#include <doctest.h>

#include <string>

#include "cesdet/config.hpp"

using namespace cesdet;
using config::Command;
using config::ConfigError;

namespace {

const char* kValid = R"({
  "schema_version": 1,
  "N": 4,
  "M1": 16,
  "M0": 128,
  "model": {"kind": "complex_t", "shape": 5},
  "sigma": {"kind": "exponential", "rho": 0.9},
  "steering": {"kind": "fourier", "f": 0.1},
  "detectors": ["mglrt", "wald"],
  "trials": 100,
  "seed": 7,
  "nominal_pfa": [0.05]
})";

std::string error_of(const std::string& text, Command cmd = Command::Simulate) {
  try {
    config::parse(text, cmd, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("valid simulate config") {
  const auto loaded = config::parse(kValid, Command::Simulate);
  const ExperimentConfig& c = loaded.experiment;
  CHECK(c.n == 4);
  CHECK(c.m1 == 16);
  CHECK(c.model == CesModel::complex_t(5));
  CHECK(c.sigma.kind == SigmaSpec::Kind::Exponential);
  CHECK(c.sigma.rho == 0.9);
  CHECK(c.steering.frequency == 0.1);
  CHECK(c.detectors == std::vector<DetectorId>{DetectorId::Mglrt, DetectorId::Wald});
  CHECK(c.seed == 7);
  CHECK(c.nominal_pfa == std::vector<double>{0.05});
}

TEST_CASE("unknown keys are errors anchored to their line") {
  const std::string text = replace(kValid, "\"trials\": 100,", "\"trials\": 100,\n  \"trails\": 5,");
  const std::string msg = error_of(text);
  CHECK(msg.find("cfg.json:11:") == 0);
  CHECK(msg.find("trails") != std::string::npos);
}

TEST_CASE("M0 < N names the invariant and its line") {
  const std::string msg = error_of(replace(kValid, "\"M0\": 128", "\"M0\": 3"));
  CHECK(msg.find("cfg.json:5:") == 0);
  CHECK(msg.find("M0 >= N") != std::string::npos);
}

TEST_CASE("other rejections") {
  CHECK(error_of(replace(kValid, "\"schema_version\": 1", "\"schema_version\": 2")).find("schema_version") !=
        std::string::npos);
  CHECK(error_of(replace(kValid, "\"shape\": 5", "\"shape\": 2")).find("nu must be > 2") != std::string::npos);
  CHECK(error_of(replace(kValid, "\"wald\"", "\"rao\"")).find("unknown detector") != std::string::npos);
  CHECK(error_of(replace(kValid, "\"mglrt\", \"wald\"", "\"kelly\"")).find("M1 = 1") != std::string::npos);
  CHECK(error_of(replace(kValid, "\"rho\": 0.9", "\"rho\": 1.5")).find("rho") != std::string::npos);
  CHECK(error_of(replace(kValid, "\"seed\": 7", "\"seed\": -7")).find("seed") != std::string::npos);
  CHECK(error_of(replace(kValid, "\"trials\": 100", "\"trials\": 0")).find("trials") != std::string::npos);
  CHECK(error_of("{ \"N\": 4,, }").find("cfg.json:1:") == 0);
  CHECK(error_of("[1, 2]").find("object") != std::string::npos);
  CHECK_FALSE(error_of(kValid, Command::Roc).empty());  // snr_db missing
  CHECK(error_of(kValid, Command::Asymptotics).find("unknown key") != std::string::npos);
}

TEST_CASE("roc and asymptotics configs") {
  const std::string roc = replace(kValid, "\"seed\": 7,", "\"seed\": 7,\n  \"snr_db\": [10, 0],\n  \"calibrate\": true,");
  const auto r = config::parse(roc, Command::Roc);
  CHECK(r.roc.snr_db == std::vector<double>{10, 0});
  CHECK(r.roc.calibrate);

  const auto a = config::parse(R"({"schema_version": 1, "N": 3, "model": {"kind": "k", "shape": 2},
    "sigma": {"kind": "explicit", "re": [[2,0,0],[0,1,0],[0,0,1]], "im": [[0,0,0],[0,0,0],[0,0,0]]},
    "steering": {"kind": "explicit", "re": [1,0,0]}, "sample_size": 1000, "blocks": 4, "seed": 1})",
                               Command::Asymptotics);
  CHECK(a.asymptotics.n == 3);
  CHECK(a.asymptotics.model == CesModel::k_dist(2));
  CHECK(a.asymptotics.sigma.build(3)(0, 0) == cplx(2, 0));
  CHECK(a.asymptotics.mc.blocks == 4);

  CHECK(error_of(R"({"schema_version": 1, "N": 2, "model": {"kind": "gaussian"},
    "sigma": {"kind": "explicit", "re": [[1,2],[2,1]]}, "sample_size": 1000, "seed": 1})",
                 Command::Asymptotics)
            .find("positive definite") != std::string::npos);
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 5.991464547107979, 1e-300, 12345.678}) {
    CHECK(std::stod(config::fmt_double(x)) == x);
  }
  CHECK(config::fmt_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("schema hash is stable") {
  CHECK(config::schema_hash() == config::schema_hash());
  CHECK(config::schema_hash().size() == 16);
}

}

#include "cesdet/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace cesdet::config {

using nlohmann::json;

namespace {

class Source {
 public:
  Source(const std::string& text, std::string name) : text_(text), name_(std::move(name)) {}

  int line_of_offset(std::size_t offset) const {
    offset = std::min(offset, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
  }

  /// Line of the first occurrence of "key" (with quotes), 0 if absent.
  int line_of_key(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_of_offset(pos);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const int line = key.empty() ? 0 : line_of_key(key);
    if (line > 0) throw ConfigError(fmt::format("{}:{}: {}", name_, line, msg));
    throw ConfigError(fmt::format("{}: {}", name_, msg));
  }

 private:
  const std::string& text_;
  std::string name_;
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const Source& src, const std::string& where) {
  if (!obj.is_object()) src.fail(where, fmt::format("'{}' must be a JSON object", where));
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) src.fail(key, fmt::format("unknown key '{}' in {}", key, where));
  }
}

const json& require(const json& obj, const std::string& key, const Source& src) {
  if (!obj.contains(key)) src.fail("", fmt::format("missing required key '{}'", key));
  return obj.at(key);
}

double get_double(const json& j, const std::string& key, const Source& src) {
  if (!j.is_number()) src.fail(key, fmt::format("'{}' must be a number", key));
  return j.get<double>();
}

Index get_index(const json& j, const std::string& key, const Source& src) {
  if (!j.is_number_integer()) src.fail(key, fmt::format("'{}' must be an integer", key));
  return j.get<Index>();
}

std::vector<double> get_doubles(const json& j, const std::string& key, const Source& src) {
  if (!j.is_array()) src.fail(key, fmt::format("'{}' must be an array of numbers", key));
  std::vector<double> out;
  for (const auto& e : j) out.push_back(get_double(e, key, src));
  return out;
}

CesModel parse_model(const json& j, const Source& src) {
  check_keys(j, {"kind", "shape"}, src, "model");
  const json& kind = require(j, "kind", src);
  if (!kind.is_string()) src.fail("kind", "model kind must be a string");
  const std::string k = kind.get<std::string>();
  auto shape = [&] { return get_double(require(j, "shape", src), "shape", src); };
  try {
    if (k == "gaussian") {
      if (j.contains("shape")) src.fail("shape", "gaussian model takes no shape");
      return CesModel::gaussian();
    }
    if (k == "complex_t") return CesModel::complex_t(shape());
    if (k == "k") return CesModel::k_dist(shape());
    if (k == "gen_gaussian") return CesModel::gen_gaussian(shape());
  } catch (const InvalidArgument& e) {
    src.fail("shape", e.what());
  }
  src.fail("kind", fmt::format("unknown model kind '{}' (gaussian, complex_t, k, gen_gaussian)", k));
}

CMatrix parse_complex_matrix(const json& j, const Source& src) {
  check_keys(j, {"kind", "re", "im"}, src, "sigma");
  const json& re = require(j, "re", src);
  if (!re.is_array() || re.empty()) src.fail("re", "sigma.re must be a non-empty array of rows");
  const auto n = static_cast<Index>(re.size());
  CMatrix m = CMatrix::Zero(n, n);
  for (Index r = 0; r < n; ++r) {
    const auto row = get_doubles(re[static_cast<std::size_t>(r)], "re", src);
    if (static_cast<Index>(row.size()) != n) src.fail("re", "sigma.re must be square");
    for (Index c = 0; c < n; ++c) m(r, c).real(row[static_cast<std::size_t>(c)]);
  }
  if (j.contains("im")) {
    const json& im = j.at("im");
    if (!im.is_array() || static_cast<Index>(im.size()) != n) src.fail("im", "sigma.im must match sigma.re");
    for (Index r = 0; r < n; ++r) {
      const auto row = get_doubles(im[static_cast<std::size_t>(r)], "im", src);
      if (static_cast<Index>(row.size()) != n) src.fail("im", "sigma.im must be square");
      for (Index c = 0; c < n; ++c) m(r, c).imag(row[static_cast<std::size_t>(c)]);
    }
  }
  return m;
}

SigmaSpec parse_sigma(const json& j, const Source& src) {
  if (!j.is_object()) src.fail("sigma", "'sigma' must be an object");
  const json& kind = require(j, "kind", src);
  if (!kind.is_string()) src.fail("kind", "sigma kind must be a string");
  const std::string k = kind.get<std::string>();
  SigmaSpec s;
  if (k == "identity") {
    check_keys(j, {"kind"}, src, "sigma");
    s.kind = SigmaSpec::Kind::Identity;
  } else if (k == "exponential") {
    check_keys(j, {"kind", "rho"}, src, "sigma");
    s.kind = SigmaSpec::Kind::Exponential;
    s.rho = get_double(require(j, "rho", src), "rho", src);
    if (!(std::abs(s.rho) < 1.0)) src.fail("rho", "sigma.rho must satisfy |rho| < 1");
  } else if (k == "explicit") {
    s.kind = SigmaSpec::Kind::Explicit;
    s.explicit_matrix = parse_complex_matrix(j, src);
  } else {
    src.fail("sigma", fmt::format("unknown sigma kind '{}' (identity, exponential, explicit)", k));
  }
  return s;
}

SteeringSpec parse_steering(const json& j, const Source& src) {
  if (!j.is_object()) src.fail("steering", "'steering' must be an object");
  const json& kind = require(j, "kind", src);
  if (!kind.is_string()) src.fail("kind", "steering kind must be a string");
  const std::string k = kind.get<std::string>();
  SteeringSpec s;
  if (k == "fourier") {
    check_keys(j, {"kind", "f"}, src, "steering");
    s.kind = SteeringSpec::Kind::Fourier;
    s.frequency = j.contains("f") ? get_double(j.at("f"), "f", src) : 0.0;
  } else if (k == "explicit") {
    check_keys(j, {"kind", "re", "im"}, src, "steering");
    s.kind = SteeringSpec::Kind::Explicit;
    const auto re = get_doubles(require(j, "re", src), "re", src);
    std::vector<double> im(re.size(), 0.0);
    if (j.contains("im")) im = get_doubles(j.at("im"), "im", src);
    if (im.size() != re.size()) src.fail("im", "steering.im must match steering.re");
    s.explicit_vector.resize(static_cast<Index>(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) s.explicit_vector(static_cast<Index>(i)) = cplx(re[i], im[i]);
  } else {
    src.fail("steering", fmt::format("unknown steering kind '{}' (fourier, explicit)", k));
  }
  return s;
}

std::uint64_t parse_seed(const json& j, const Source& src) {
  if (!j.is_number_unsigned()) src.fail("seed", "'seed' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

// Key whose line best anchors a validation message.
std::string anchor_for(const std::string& msg) {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"M0", "M0"}, {"M1", "M1"},       {"trials", "trials"},   {"nominal_pfa", "nominal_pfa"},
      {"threshold", "thresholds"}, {"detector", "detectors"}, {"kelly", "detectors"},
      {"amf", "detectors"},        {"sigma", "sigma"},        {"steering", "steering"},
      {"N must", "N"},             {"alpha", "alpha"},        {"positive definite", "sigma"}};
  for (const auto& [needle, key] : table) {
    if (msg.find(needle) != std::string::npos) return key;
  }
  return "";
}

ExperimentConfig parse_experiment(const json& root, const Source& src) {
  ExperimentConfig cfg;
  cfg.n = get_index(require(root, "N", src), "N", src);
  cfg.m1 = get_index(require(root, "M1", src), "M1", src);
  cfg.m0 = get_index(require(root, "M0", src), "M0", src);
  cfg.model = parse_model(require(root, "model", src), src);
  if (root.contains("sigma")) cfg.sigma = parse_sigma(root.at("sigma"), src);
  if (root.contains("steering")) cfg.steering = parse_steering(root.at("steering"), src);
  if (root.contains("alpha")) {
    const json& a = root.at("alpha");
    check_keys(a, {"re", "im"}, src, "alpha");
    const double re = a.contains("re") ? get_double(a.at("re"), "re", src) : 0.0;
    const double im = a.contains("im") ? get_double(a.at("im"), "im", src) : 0.0;
    cfg.alpha = {re, im};
  }
  const json& dets = require(root, "detectors", src);
  if (!dets.is_array() || dets.empty()) src.fail("detectors", "'detectors' must be a non-empty array");
  cfg.detectors.clear();
  for (const auto& d : dets) {
    if (!d.is_string()) src.fail("detectors", "detector names must be strings");
    const auto id = parse_detector(d.get<std::string>());
    if (!id) src.fail("detectors", fmt::format("unknown detector '{}' (mglrt, kelly, wald, amf)", d.get<std::string>()));
    if (std::find(cfg.detectors.begin(), cfg.detectors.end(), *id) != cfg.detectors.end()) {
      src.fail("detectors", fmt::format("duplicate detector '{}'", d.get<std::string>()));
    }
    cfg.detectors.push_back(*id);
  }
  if (root.contains("wald_scatter")) {
    const json& w = root.at("wald_scatter");
    const std::string s = w.is_string() ? w.get<std::string>() : "";
    if (s == "t1") {
      cfg.wald_scatter = WaldScatter::T1AtEtaHat;
    } else if (s == "s0") {
      cfg.wald_scatter = WaldScatter::S0OverM0;
    } else {
      src.fail("wald_scatter", "'wald_scatter' must be \"t1\" or \"s0\"");
    }
  }
  cfg.trials = get_index(require(root, "trials", src), "trials", src);
  cfg.seed = parse_seed(require(root, "seed", src), src);
  if (root.contains("nominal_pfa")) cfg.nominal_pfa = get_doubles(root.at("nominal_pfa"), "nominal_pfa", src);
  if (root.contains("thresholds")) cfg.thresholds = get_doubles(root.at("thresholds"), "thresholds", src);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    src.fail(anchor_for(e.what()), e.what());
  }
  return cfg;
}

AsymptoticsSettings parse_asymptotics(const json& root, const Source& src) {
  AsymptoticsSettings s;
  s.n = get_index(require(root, "N", src), "N", src);
  if (s.n < 1) src.fail("N", "N must be >= 1");
  s.model = parse_model(require(root, "model", src), src);
  if (root.contains("sigma")) s.sigma = parse_sigma(root.at("sigma"), src);
  if (root.contains("steering")) s.steering = parse_steering(root.at("steering"), src);
  s.mc.sample_size = get_index(require(root, "sample_size", src), "sample_size", src);
  if (root.contains("blocks")) s.mc.blocks = get_index(root.at("blocks"), "blocks", src);
  s.mc.seed = parse_seed(require(root, "seed", src), src);
  if (s.mc.blocks < 2) src.fail("blocks", "blocks must be >= 2");
  if (s.mc.sample_size < 2 * s.mc.blocks) src.fail("sample_size", "sample_size must be >= 2 * blocks");
  try {
    Cholesky(s.sigma.build(s.n));
    s.steering.build(s.n);
  } catch (const std::exception& e) {
    src.fail(anchor_for(e.what()), e.what());
  }
  return s;
}

json matrix_json(const RMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const RVector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json proportion_json(const Proportion& p) {
  return {{"successes", p.successes}, {"trials", p.trials}, {"estimate", p.estimate}, {"ci_lo", p.lo}, {"ci_hi", p.hi}};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Loaded parse(const std::string& text, Command command, const std::string& source_name) {
  const Source src(text, source_name);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}:{}: JSON parse error: {}", source_name, src.line_of_offset(e.byte > 0 ? e.byte - 1 : 0),
                                  e.what()));
  }
  if (!root.is_object()) src.fail("", "top level must be a JSON object");

  std::set<std::string> allowed;
  switch (command) {
    case Command::Simulate:
    case Command::Roc:
      allowed = {"schema_version", "N",      "M1",    "M0",          "model",      "sigma",
                 "steering",       "alpha",  "detectors", "wald_scatter", "trials", "seed",
                 "nominal_pfa",    "thresholds"};
      if (command == Command::Roc) {
        allowed.insert("snr_db");
        allowed.insert("calibrate");
      }
      break;
    case Command::Asymptotics:
      allowed = {"schema_version", "N", "model", "sigma", "steering", "sample_size", "blocks", "seed"};
      break;
  }
  check_keys(root, allowed, src, "config");
  const json& version = require(root, "schema_version", src);
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    src.fail("schema_version", fmt::format("unsupported schema_version (expected {})", kSchemaVersion));
  }

  Loaded out;
  if (command == Command::Asymptotics) {
    out.asymptotics = parse_asymptotics(root, src);
    return out;
  }
  out.experiment = parse_experiment(root, src);
  if (command == Command::Roc) {
    out.roc.snr_db = get_doubles(require(root, "snr_db", src), "snr_db", src);
    for (double d : out.roc.snr_db) {
      if (!std::isfinite(d)) src.fail("snr_db", "snr_db entries must be finite");
    }
    if (root.contains("calibrate")) {
      if (!root.at("calibrate").is_boolean()) src.fail("calibrate", "'calibrate' must be true or false");
      out.roc.calibrate = root.at("calibrate").get<bool>();
    }
    if (out.experiment.nominal_pfa.empty() && out.experiment.thresholds.empty()) {
      src.fail("nominal_pfa", "roc needs nominal_pfa or thresholds");
    }
  }
  return out;
}

Loaded load(const std::filesystem::path& path, Command command) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), command, path.string());
}

std::string schema_hash() {
  return fmt::format("{:016x}", fnv1a(std::string(kSimulateCsvHeader) + "\n" + kRocCsvHeader));
}

std::string fmt_double(double x) {
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  return fmt::format("{:.17g}", x);
}

std::string simulate_csv(const ExperimentResult& result) {
  const ExperimentConfig& cfg = result.config;
  std::string out = std::string(kSimulateCsvHeader) + "\n";
  for (const auto& det : result.detectors) {
    for (const auto& row : det.rows) {
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", detector_name(det.id), cfg.model.name(), cfg.n, cfg.m1,
                         cfg.m0, result.completed_trials, fmt_double(row.threshold), fmt_double(row.exceed.estimate),
                         fmt_double(row.exceed.lo), fmt_double(row.exceed.hi), det.ks ? fmt_double(*det.ks) : "",
                         cfg.seed);
    }
  }
  return out;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = std::string(kRocCsvHeader) + "\n";
  for (const auto& p : curve.points) {
    out += fmt::format("{},{},{},{},{}\n", fmt_double(p.snr_db), fmt_double(p.threshold), fmt_double(p.detect.estimate),
                       fmt_double(p.detect.lo), fmt_double(p.detect.hi));
  }
  return out;
}

json to_json(const ExperimentConfig& cfg) {
  json dets = json::array();
  for (DetectorId id : cfg.detectors) dets.push_back(std::string(detector_name(id)));
  json model = {{"kind", cfg.model.kind_name()}};
  if (cfg.model.kind() != CesKind::Gaussian) model["shape"] = cfg.model.shape();
  return {{"N", cfg.n},
          {"M1", cfg.m1},
          {"M0", cfg.m0},
          {"model", model},
          {"sigma", cfg.sigma.describe()},
          {"steering", cfg.steering.describe()},
          {"alpha", {{"re", cfg.alpha.real()}, {"im", cfg.alpha.imag()}}},
          {"detectors", dets},
          {"wald_scatter", cfg.wald_scatter == WaldScatter::T1AtEtaHat ? "t1" : "s0"},
          {"trials", cfg.trials},
          {"seed", cfg.seed},
          {"nominal_pfa", cfg.nominal_pfa},
          {"thresholds", cfg.thresholds}};
}

json to_json(const ExperimentResult& result) {
  json dets = json::array();
  for (const auto& d : result.detectors) {
    json rows = json::array();
    for (const auto& r : d.rows) {
      json row = {{"threshold", r.threshold}, {"pfa_hat", proportion_json(r.exceed)}};
      row["nominal_pfa"] = r.nominal_pfa ? json(*r.nominal_pfa) : json(nullptr);
      rows.push_back(row);
    }
    json ecdf = json::array();
    if (!d.sorted.empty()) {
      for (int i = 0; i <= 100; ++i) {
        const double q = i / 100.0;
        ecdf.push_back({{"q", q}, {"x", empirical_quantile(d.sorted, std::max(q, 1e-12))}});
      }
    }
    json cal = json::array();
    for (const auto& c : d.calibration) {
      cal.push_back({{"nominal_pfa", c.nominal_pfa},
                     {"empirical_threshold", c.empirical_threshold},
                     {"asymptotic_threshold", c.asymptotic_threshold},
                     {"relative_gap", c.relative_gap}});
    }
    dets.push_back({{"detector", std::string(detector_name(d.id))},
                    {"dof", 2},
                    {"thresholds", rows},
                    {"ks_chi2_2", d.ks ? json(*d.ks) : json(nullptr)},
                    {"storage", d.sorted.empty() && d.sketch ? "sketch" : "full"},
                    {"ecdf", ecdf},
                    {"overflow_events", d.overflow_events},
                    {"calibration", cal},
                    {"calibration_note", d.calibration_note}});
  }
  return {{"config", to_json(result.config)},
          {"completed_trials", result.completed_trials},
          {"partial", result.partial},
          {"failure", result.failure},
          {"snr", result.snr},
          {"snr_definition", "|alpha|^2 v^H Sigma^-1 v"},
          {"detectors", dets}};
}

json to_json(const RocResult& result) {
  json curves = json::array();
  for (const auto& c : result.curves) {
    json pts = json::array();
    for (const auto& p : c.points) {
      pts.push_back({{"snr_db", std::isinf(p.snr_db) ? json(nullptr) : json(p.snr_db)},
                     {"threshold", p.threshold},
                     {"pd", proportion_json(p.detect)}});
    }
    curves.push_back({{"detector", std::string(detector_name(c.id))}, {"points", pts}});
  }
  return {{"config", to_json(result.config)},
          {"partial", result.partial},
          {"failure", result.failure},
          {"snr_definition", "|alpha|^2 v^H Sigma^-1 v"},
          {"curves", curves}};
}

json to_json(const SandwichReport& r) {
  return {{"model", r.model},
          {"N", r.dim},
          {"sample_size", r.sample_size},
          {"blocks", r.blocks},
          {"seed", r.seed},
          {"sign_convention", r.sign_convention},
          {"eta_bar", vector_json(r.eta_bar)},
          {"mu_bar", vector_json(r.mu_bar)},
          {"A", matrix_json(r.a)},
          {"B", matrix_json(r.b)},
          {"C", matrix_json(r.c)},
          {"A_se", matrix_json(r.a_se)},
          {"B_se", matrix_json(r.b_se)},
          {"P", matrix_json(r.p)},
          {"C_eta", matrix_json(r.c_eta)},
          {"H", matrix_json(r.h)},
          {"lambdas", vector_json(r.lambdas)},
          {"lambda_se", vector_json(r.lambda_se)},
          {"A_eta_closed_form", r.a_eta_closed_form},
          {"max_cross_A_over_se", r.max_cross_a_over_se},
          {"max_cross_B_over_se", r.max_cross_b_over_se}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cesdet::config

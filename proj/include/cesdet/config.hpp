#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesdet/asymptotics.hpp"
#include "cesdet/montecarlo.hpp"

namespace cesdet::config {

inline constexpr int kSchemaVersion = 1;

/// Parse or validation failure; the message is anchored to a line of the
/// config file ("path:line: ...") whenever the offending key can be located.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { Simulate, Roc, Asymptotics };

struct RocSettings {
  std::vector<double> snr_db;
  bool calibrate = false;
};

struct AsymptoticsSettings {
  Index n = 4;
  CesModel model = CesModel::gaussian();
  SigmaSpec sigma;
  SteeringSpec steering;
  MonteCarloOptions mc;
};

struct Loaded {
  ExperimentConfig experiment;  // simulate, roc
  RocSettings roc;              // roc
  AsymptoticsSettings asymptotics;
};

/// Parses JSON text for the given subcommand. Unknown keys are errors.
Loaded parse(const std::string& text, Command command, const std::string& source_name = "config");
Loaded load(const std::filesystem::path& path, Command command);

/// CSV headers; their hash goes into the run manifest.
inline constexpr const char* kSimulateCsvHeader =
    "detector,model,N,M1,M0,trials,threshold,pfa_hat,ci_lo,ci_hi,ks,seed";
inline constexpr const char* kRocCsvHeader = "snr_db,threshold,pd,ci_lo,ci_hi";
std::string schema_hash();

/// 17 significant digits.
std::string fmt_double(double x);

std::string simulate_csv(const ExperimentResult& result);
std::string roc_csv(const RocCurve& curve);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentResult& result);
nlohmann::json to_json(const RocResult& result);
nlohmann::json to_json(const SandwichReport& report);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace cesdet::config

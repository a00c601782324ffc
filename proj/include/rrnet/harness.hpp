#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "rrnet/network.hpp"

namespace rrnet {

using Json = nlohmann::ordered_json;

/// Version string written into every summary.
const char* version_string() noexcept;

/// Flat experiment description. `params` holds every key except `kind`;
/// see docs/config.md for the key list per kind.
struct ExperimentConfig {
  std::string kind;
  Json params = Json::object();

  /// Keys that only steer execution and never reach the output files.
  static bool is_execution_key(const std::string& key);
};

/// Kinds accepted by run_experiment.
const std::vector<std::string>& experiment_kinds();

/// Keys accepted for a kind (execution keys included).
std::vector<std::string> allowed_keys(const std::string& kind);

/// Throws ConfigError naming "kind" or the first unknown key.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // stream id used by the trial
  std::vector<double> values;
  std::string status = "ok";
};

struct RunResult {
  std::string stem;  // output file stem, e.g. "probe_sign_flip"
  std::vector<std::string> columns;
  std::vector<TrialRecord> rows;
  Json summary = Json::object();  // full summary document
  bool alert = false;
};

/// Dispatches to the module operation for config.kind. Deterministic in the
/// config (execution keys aside). Throws ConfigError for bad parameters.
RunResult run_experiment(const ExperimentConfig& config);

/// Builds the network described by the architecture keys from RngStream(seed, 0).
Network sample_network(const ExperimentConfig& config);

/// Header `trial,seed,<columns>,status`; reals with 17 significant digits,
/// NaN as an empty field. Throws IoError.
void write_csv(const std::vector<std::string>& columns, const std::vector<TrialRecord>& rows,
               const std::filesystem::path& path);
std::string format_csv(const std::vector<std::string>& columns,
                       const std::vector<TrialRecord>& rows);

/// Pretty-printed JSON with a trailing newline. Throws IoError.
void write_summary_json(const Json& summary, const std::filesystem::path& path);

/// Top-level keys every summary document carries.
const std::vector<std::string>& summary_keys();

/// 17 significant digits, "nan"/"inf" spelled out.
std::string format_real(double v);

}  // namespace rrnet

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privbcast/runner.hpp"

namespace privbcast::cli {

// Invalid configuration; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  RunConfig run;
  std::uint32_t trials = 1;
  std::uint64_t seed = 1;
  bool fixed_topology = false;  // one graph from the master seed for all runs
  std::string output = "-";
  std::string trace_dir;        // per-run NDJSON trace and JSON run record
  unsigned jobs = 1;
};

enum class FieldType { kUnsigned, kDouble, kBool, kString, kDepth };

struct FieldInfo {
  const char* key;
  FieldType type;
  const char* help;
};

// Every configurable key; command-line flags are the kebab-case spelling.
std::span<const FieldInfo> config_fields();
std::string flag_name(const std::string& key);

// Converts a flag's text into the JSON value for `key`.
nlohmann::json field_value(const std::string& key, const std::string& text);

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);

// PRIVBCAST_SEED, when set and valid.
std::optional<std::uint64_t> seed_from_env();

extern const char* const kCsvHeader;

std::string csv_row(const RunReport& report);
// "mean" and "stddev" rows over the given runs.
std::vector<std::string> aggregate_rows(std::span<const RunReport> reports,
                                        const ExperimentConfig& config);

// Runs `trials` simulations with seeds seed + index; results come back in
// run order whatever the job count. `first_run_id` offsets the run ids.
std::vector<RunResult> run_trials(const ExperimentConfig& config, std::uint64_t first_run_id = 0);

void write_run_files(const std::string& dir, const RunResult& result);

// The whole command line; returns the process exit code.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

}  // namespace privbcast::cli

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mfglab {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

enum class RunStatus { Passed = 0, Error = 1, ChecksFailed = 2, Usage = 64 };

struct RunResult {
  std::string kind;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  /// file name -> content, written in key order
  std::map<std::string, std::string> artifacts;
  nlohmann::json manifest;
  RunStatus status = RunStatus::Passed;
  bool passed() const;
};

/// Validate and execute an experiment. Throws ConfigError on invalid
/// configuration and other mfglab::Error subclasses on numerical failure.
RunResult run_experiment(const nlohmann::json& config, const RunOptions& options = {});

/// Parse a config file; throws ConfigError when unreadable or malformed.
nlohmann::json load_config(const std::filesystem::path& path);

/// Write artifacts and manifest.json into dir (created if needed).
void write_artifacts(const RunResult& result, const std::filesystem::path& dir);

/// Human-readable catalog of experiment kinds, required keys and defaults.
std::string experiment_catalog();
std::vector<std::string> experiment_kinds();

/// Hex SHA-256 of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& config);

const char* library_version();

}  // namespace mfglab

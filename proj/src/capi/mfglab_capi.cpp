#include "mfglab/mfglab.h"

#include "mfglab/errors.hpp"
#include "mfglab/experiment.hpp"
#include "mfglab/master.hpp"
#include "mfglab/measures.hpp"

#include <memory>
#include <string>
#include <vector>

struct mfglab_run {
  mfglab::RunResult result;
  std::string manifest;
  std::vector<std::string> artifact_names;
  std::string output_dir;
};

namespace {

thread_local std::string last_error;

mfglab_status fail(mfglab_status code, const std::string& message) {
  last_error = message;
  return code;
}

template <class F>
mfglab_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const mfglab::ConfigError& e) {
    return fail(MFGLAB_USAGE, e.what());
  } catch (const mfglab::InvalidInput& e) {
    return fail(MFGLAB_USAGE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(MFGLAB_USAGE, std::string("config: ") + e.what());
  } catch (const std::exception& e) {
    return fail(MFGLAB_ERROR, e.what());
  } catch (...) {
    return fail(MFGLAB_ERROR, "unknown error");
  }
}

mfglab_status finish(const nlohmann::json& config, const mfglab_run_options* options,
                     mfglab_run** out) {
  mfglab::RunOptions opts;
  if (options) {
    if (options->has_seed) opts.seed = options->seed;
    opts.threads = options->threads > 0 ? options->threads : 1;
  }
  auto run = std::make_unique<mfglab_run>();
  run->result = mfglab::run_experiment(config, opts);
  if (options && options->write_artifacts) {
    if (options->out_dir && *options->out_dir)
      run->output_dir = options->out_dir;
    else if (config.contains("output") && config.at("output").is_string())
      run->output_dir = config.at("output").get<std::string>();
    else
      run->output_dir = "results/" + run->result.kind;
    mfglab::write_artifacts(run->result, run->output_dir);
  }
  run->manifest = run->result.manifest.dump(2);
  for (const auto& [name, content] : run->result.artifacts) run->artifact_names.push_back(name);
  const mfglab_status status = static_cast<mfglab_status>(run->result.status);
  *out = run.release();
  return status;
}

}  // namespace

extern "C" {

mfglab_status mfglab_run_file(const char* config_path, const mfglab_run_options* options,
                              mfglab_run** out) {
  if (!out) return fail(MFGLAB_USAGE, "out must not be NULL");
  *out = nullptr;
  if (!config_path) return fail(MFGLAB_USAGE, "config path must not be NULL");
  return guarded([&] { return finish(mfglab::load_config(config_path), options, out); });
}

mfglab_status mfglab_run_json(const char* config_json, const mfglab_run_options* options,
                              mfglab_run** out) {
  if (!out) return fail(MFGLAB_USAGE, "out must not be NULL");
  *out = nullptr;
  if (!config_json) return fail(MFGLAB_USAGE, "config must not be NULL");
  return guarded([&] {
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw mfglab::ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return finish(config, options, out);
  });
}

void mfglab_run_free(mfglab_run* run) { delete run; }

mfglab_status mfglab_run_status(const mfglab_run* run) {
  if (!run) return fail(MFGLAB_USAGE, "run must not be NULL");
  return static_cast<mfglab_status>(run->result.status);
}

size_t mfglab_run_check_count(const mfglab_run* run) { return run ? run->result.checks.size() : 0; }

int mfglab_run_check(const mfglab_run* run, size_t index, const char** name, int* passed,
                     double* value, double* threshold) {
  if (!run || index >= run->result.checks.size()) return -1;
  const auto& c = run->result.checks[index];
  if (name) *name = c.name.c_str();
  if (passed) *passed = c.passed ? 1 : 0;
  if (value) *value = c.value;
  if (threshold) *threshold = c.threshold;
  return 0;
}

size_t mfglab_run_artifact_count(const mfglab_run* run) {
  return run ? run->artifact_names.size() : 0;
}

const char* mfglab_run_artifact_name(const mfglab_run* run, size_t index) {
  if (!run || index >= run->artifact_names.size()) return nullptr;
  return run->artifact_names[index].c_str();
}

const char* mfglab_run_artifact(const mfglab_run* run, const char* name, size_t* length) {
  if (!run || !name) return nullptr;
  const auto it = run->result.artifacts.find(name);
  if (it == run->result.artifacts.end()) return nullptr;
  if (length) *length = it->second.size();
  return it->second.c_str();
}

const char* mfglab_run_manifest(const mfglab_run* run) { return run ? run->manifest.c_str() : nullptr; }

const char* mfglab_run_output_dir(const mfglab_run* run) {
  return run ? run->output_dir.c_str() : nullptr;
}

const char* mfglab_last_error(void) { return last_error.c_str(); }

const char* mfglab_catalog(void) {
  static const std::string text = mfglab::experiment_catalog();
  return text.c_str();
}

const char* mfglab_version(void) { return mfglab::library_version(); }

mfglab_status mfglab_counterexample(double t, double q, double* value, double* minimizers,
                                    size_t capacity, size_t* count) {
  return guarded([&] {
    const mfglab::HopfLaxResult r = mfglab::counterexample_hopf_lax(t, q);
    if (value) *value = r.value;
    if (count) *count = r.minimizers.size();
    if (minimizers)
      for (size_t i = 0; i < r.minimizers.size() && i < capacity; ++i) minimizers[i] = r.minimizers[i];
    return MFGLAB_OK;
  });
}

mfglab_status mfglab_w2(const double* mu, const double* nu, int m, int d, double* distance,
                        int* perm) {
  if (!mu || !nu || !distance) return fail(MFGLAB_USAGE, "null argument");
  if (m < 1 || d < 1) return fail(MFGLAB_USAGE, "m and d must be positive");
  return guarded([&] {
    const mfglab::Vec a = Eigen::Map<const mfglab::Vec>(mu, static_cast<Eigen::Index>(m) * d);
    const mfglab::Vec b = Eigen::Map<const mfglab::Vec>(nu, static_cast<Eigen::Index>(m) * d);
    const mfglab::Transport tr =
        mfglab::w2_distance(mfglab::EmpiricalMeasure(a, d), mfglab::EmpiricalMeasure(b, d));
    *distance = tr.distance;
    if (perm)
      for (int i = 0; i < m; ++i) perm[i] = tr.coupling.perm[i];
    return MFGLAB_OK;
  });
}

}  // extern "C"

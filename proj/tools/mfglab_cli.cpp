#include "mfglab/mfglab.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

namespace {

int env_threads() {
  const char* v = std::getenv("MFGLAB_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) {
    std::fprintf(stderr, "mfglab: ignoring invalid MFGLAB_THREADS='%s'\n", v);
    return 1;
  }
  return static_cast<int>(n);
}

int run(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
        std::optional<int> threads) {
  mfglab_run_options opts{};
  opts.out_dir = out.empty() ? nullptr : out.c_str();
  opts.write_artifacts = 1;
  opts.has_seed = seed.has_value();
  opts.seed = seed.value_or(0);
  opts.threads = threads ? *threads : env_threads();

  mfglab_run* handle = nullptr;
  const mfglab_status status = mfglab_run_file(config.c_str(), &opts, &handle);
  if (!handle) {
    std::fprintf(stderr, "mfglab: %s\n", mfglab_last_error());
    return status;
  }
  const size_t n = mfglab_run_check_count(handle);
  for (size_t i = 0; i < n; ++i) {
    const char* name = nullptr;
    int passed = 0;
    double value = 0, threshold = 0;
    mfglab_run_check(handle, i, &name, &passed, &value, &threshold);
    std::printf("%-4s %-48s %.6g (threshold %.6g)\n", passed ? "PASS" : "FAIL", name, value,
                threshold);
  }
  std::printf("artifacts: %s\n", mfglab_run_output_dir(handle));
  mfglab_run_free(handle);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"m-particle mean field game laboratory"};
  app.set_version_flag("--version", std::string(mfglab_version()));
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  run_cmd->add_option("config", config, "experiment config (JSON)")->required();
  run_cmd->add_option("--out", out, "artifact directory");
  run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--threads", threads, "worker threads (default: MFGLAB_THREADS or 1)")
      ->check(CLI::Range(1, 1024));

  app.add_subcommand("list", "list experiment kinds and their parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : MFGLAB_USAGE;
  }

  if (app.got_subcommand("list")) {
    std::fputs(mfglab_catalog(), stdout);
    return 0;
  }
  return run(config, out, seed, threads);
}

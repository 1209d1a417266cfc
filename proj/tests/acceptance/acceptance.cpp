// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mfglab_acceptance [--criterion N]... [--configs DIR]

#include "mfglab/errors.hpp"
#include "mfglab/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using mfglab::RunResult;

namespace {

struct Criterion {
  int id;
  const char* title;
  const char* config;  // under acceptance/, empty for determinism
};

const std::vector<Criterion> kCriteria = {
    {1, "counterexample exactness", "c01_counterexample.json"},
    {2, "closed-form value", "c02_closed_form.json"},
    {3, "m-scaling of Hessian blocks", "c03_hessian_scaling.json"},
    {4, "third-derivative scaling", "c04_third_scaling.json"},
    {5, "block-ODE lemmas", "c05_blockode.json"},
    {6, "flow round trip and Jacobi identity", "c06_flow.json"},
    {7, "HJ residual", "c07_hj_residual.json"},
    {8, "convexity propagation", "c08_convexity.json"},
    {9, "master consistency and residuals", "c09_master.json"},
    {10, "monotonicity dichotomy", "c10_monotonicity.json"},
    {11, "transport oracle", "c11_transport.json"},
    {12, "determinism of shipped configs", ""},
};

class Runner {
 public:
  explicit Runner(fs::path root) : root_(std::move(root)) {}

  // first run of a config is cached for the determinism criterion
  const RunResult& run(const fs::path& path) {
    auto it = cache_.find(path);
    if (it == cache_.end()) it = cache_.emplace(path, execute(path)).first;
    return it->second;
  }

  RunResult execute(const fs::path& path) const {
    return mfglab::run_experiment(mfglab::load_config(path));
  }

  std::vector<fs::path> shipped() const {
    std::vector<fs::path> out;
    for (const char* sub : {"acceptance", "examples"}) {
      if (!fs::exists(root_ / sub)) continue;
      for (const auto& e : fs::directory_iterator(root_ / sub))
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<fs::path, RunResult> cache_;
};

std::string summarize(const RunResult& r) {
  std::string worst;
  for (const auto& c : r.checks)
    if (!c.passed) worst += fmt::format(" {}={:.3g}>{:.3g}", c.name, c.value, c.threshold);
  if (worst.empty()) return fmt::format("{} checks passed", r.checks.size());
  return "failed:" + worst;
}

bool determinism(Runner& runner, std::string& detail) {
  int files = 0;
  std::vector<std::string> diffs;
  for (const fs::path& cfg : runner.shipped()) {
    const RunResult& a = runner.run(cfg);
    const RunResult b = runner.execute(cfg);
    for (const auto& [name, content] : a.artifacts) {
      if (fs::path(name).extension() != ".csv") continue;
      ++files;
      const auto it = b.artifacts.find(name);
      if (it == b.artifacts.end() || it->second != content)
        diffs.push_back(cfg.filename().string() + ":" + name);
    }
  }
  detail = diffs.empty() ? fmt::format("{} csv files byte-identical across reruns", files)
                         : "differs: " + fmt::format("{}", fmt::join(diffs, ", "));
  return diffs.empty() && files > 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfglab acceptance suite"};
  std::vector<int> selected;
  std::string configs = MFGLAB_CONFIG_DIR;
  app.add_option("--criterion", selected, "criterion number (repeatable)")->check(CLI::Range(1, 12));
  app.add_option("--configs", configs, "directory holding acceptance/ and examples/");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (const auto& c : kCriteria) selected.push_back(c.id);
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  Runner runner(configs);
  bool all = true;
  for (int id : selected) {
    const Criterion& c = kCriteria[id - 1];
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      if (id == 12) {
        ok = determinism(runner, detail);
      } else {
        const RunResult& r = runner.run(runner.root() / "acceptance" / c.config);
        ok = r.passed() && !r.checks.empty();
        detail = summarize(r);
      }
    } catch (const std::exception& e) {
      detail = std::string("error: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("criterion {:>2}: {}  {} [{:.1f}s] {}\n", id, ok ? "PASS" : "FAIL", c.title, secs, detail);
    std::fflush(stdout);
    all = all && ok;
  }
  return all ? 0 : 1;
}

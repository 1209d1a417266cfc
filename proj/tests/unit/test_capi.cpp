#include <doctest.h>

#include "mfglab/mfglab.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfglab_capi_" + name);
  fs::remove_all(p);
  return p;
}
}  // namespace

TEST_CASE("version and catalog") {
  CHECK(std::string(mfglab_version()) == "0.1.0");
  const std::string cat = mfglab_catalog();
  for (const char* kind : {"scaling", "counterexample", "blockode", "audit", "monotonicity"})
    CHECK(cat.find(kind) != std::string::npos);
}

TEST_CASE("counterexample through the C API") {
  double value = 0, mins[4];
  size_t n = 0;
  REQUIRE(mfglab_counterexample(2.0, 0.0, &value, mins, 4, &n) == MFGLAB_OK);
  CHECK(value == doctest::Approx(-1.25));
  CHECK(n == 2);
  CHECK(mins[1] == doctest::Approx(std::sqrt(3.0)));
  CHECK(mfglab_counterexample(-1.0, 0.0, &value, nullptr, 0, &n) == MFGLAB_USAGE);
  CHECK(std::strlen(mfglab_last_error()) > 0);
}

TEST_CASE("w2 through the C API") {
  const double mu[] = {0.0, 2.0}, nu[] = {3.0, 1.0};
  double w = 0;
  int perm[2];
  REQUIRE(mfglab_w2(mu, nu, 2, 1, &w, perm) == MFGLAB_OK);
  CHECK(w == doctest::Approx(1.0));
  CHECK(perm[0] == 1);
  CHECK(perm[1] == 0);
  CHECK(mfglab_w2(mu, nu, 0, 1, &w, nullptr) == MFGLAB_USAGE);
  CHECK(mfglab_w2(nullptr, nu, 2, 1, &w, nullptr) == MFGLAB_USAGE);
}

TEST_CASE("runs from JSON") {
  const fs::path out = scratch("json");
  mfglab_run_options opts{};
  opts.out_dir = out.c_str();
  opts.write_artifacts = 1;
  mfglab_run* run = nullptr;
  const char* cfg = R"({"kind": "counterexample", "seed": 4, "params": {"points": [[2, 0]]}})";
  REQUIRE(mfglab_run_json(cfg, &opts, &run) == MFGLAB_OK);
  REQUIRE(run != nullptr);
  CHECK(mfglab_run_status(run) == MFGLAB_OK);
  CHECK(mfglab_run_check_count(run) > 0);
  const char* name = nullptr;
  int passed = 0;
  double v = 0, thr = 0;
  CHECK(mfglab_run_check(run, 0, &name, &passed, &v, &thr) == 0);
  CHECK(passed == 1);
  CHECK(mfglab_run_check(run, 1000, &name, &passed, &v, &thr) == -1);
  REQUIRE(mfglab_run_artifact_count(run) == 1);
  CHECK(std::string(mfglab_run_artifact_name(run, 0)) == "counterexample.csv");
  size_t len = 0;
  const std::string csv = mfglab_run_artifact(run, "counterexample.csv", &len);
  CHECK(len == csv.size());
  CHECK(csv.find(",-1.25,2,") != std::string::npos);
  CHECK(mfglab_run_artifact(run, "missing.csv", &len) == nullptr);
  const std::string manifest = mfglab_run_manifest(run);
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find("\"seed\": 4") != std::string::npos);
  CHECK(fs::exists(out / "counterexample.csv"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(std::string(mfglab_run_output_dir(run)) == out.string());
  mfglab_run_free(run);
  fs::remove_all(out);
}

TEST_CASE("seed override and memory-only runs") {
  mfglab_run_options opts{};
  opts.has_seed = 99;
  opts.seed = 99;
  mfglab_run* run = nullptr;
  REQUIRE(mfglab_run_json(R"({"kind": "counterexample"})", &opts, &run) == MFGLAB_OK);
  CHECK(std::string(mfglab_run_manifest(run)).find("\"seed\": 99") != std::string::npos);
  CHECK(std::string(mfglab_run_output_dir(run)).empty());
  mfglab_run_free(run);
}

TEST_CASE("failing checks report status 2") {
  mfglab_run* run = nullptr;
  // with phi1 = 0 the interaction kernel is monotone, so the dichotomy check fails
  const char* cfg = R"({"kind": "monotonicity",
    "model": {"dimension": 1},
    "data": {"phi": {"name": "quadratic", "lambda": 1}},
    "params": {"propagation": false}})";
  CHECK(mfglab_run_json(cfg, nullptr, &run) == MFGLAB_CHECK_FAILED);
  REQUIRE(run != nullptr);
  CHECK(mfglab_run_status(run) == MFGLAB_CHECK_FAILED);
  mfglab_run_free(run);
}

TEST_CASE("usage errors leave no handle") {
  mfglab_run* run = reinterpret_cast<mfglab_run*>(0x1);
  CHECK(mfglab_run_json("{not json", nullptr, &run) == MFGLAB_USAGE);
  CHECK(run == nullptr);
  CHECK(std::string(mfglab_last_error()).find("malformed") != std::string::npos);
  CHECK(mfglab_run_json(R"({"kind": "nope"})", nullptr, &run) == MFGLAB_USAGE);
  CHECK(mfglab_run_json(R"({"kind": "flow", "params": {"bogus": 1}})", nullptr, &run) == MFGLAB_USAGE);
  CHECK(std::string(mfglab_last_error()).find("bogus") != std::string::npos);
  CHECK(mfglab_run_json(R"({"kind": "flow", "params": {"instances": -3}})", nullptr, &run) ==
        MFGLAB_USAGE);
  CHECK(mfglab_run_json(R"({"kind": "scaling", "params": {"ms": [4, 8]}})", nullptr, &run) ==
        MFGLAB_USAGE);
  CHECK(mfglab_run_file("/nonexistent/config.json", nullptr, &run) == MFGLAB_USAGE);
  CHECK(mfglab_run_json(nullptr, nullptr, &run) == MFGLAB_USAGE);
  CHECK(mfglab_run_json("{}", nullptr, nullptr) == MFGLAB_USAGE);
  mfglab_run_free(nullptr);
}

TEST_CASE("identical runs give identical artifacts") {
  const char* cfg = R"({"kind": "flow", "seed": 3, "model": {"dimension": 2},
                        "params": {"instances": 3, "m_max": 3}})";
  mfglab_run *a = nullptr, *b = nullptr;
  REQUIRE(mfglab_run_json(cfg, nullptr, &a) == MFGLAB_OK);
  REQUIRE(mfglab_run_json(cfg, nullptr, &b) == MFGLAB_OK);
  for (const char* name : {"flow.csv", "trajectory.csv"})
    CHECK(std::string(mfglab_run_artifact(a, name, nullptr)) ==
          std::string(mfglab_run_artifact(b, name, nullptr)));
  mfglab_run_free(a);
  mfglab_run_free(b);
}

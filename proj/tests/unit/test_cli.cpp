#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MFGLAB_CLI_PATH + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("mfglab_cli_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("list prints the catalog") {
  const auto o = run("list");
  CHECK(o.code == 0);
  for (const char* kind : {"scaling", "counterexample", "blockode"})
    CHECK(o.out.find(kind) != std::string::npos);
}

TEST_CASE("counterexample run writes csv and manifest") {
  const fs::path cfg = write("ce.json", R"({"kind": "counterexample", "params": {"points": [[2, 0]]}})");
  const fs::path out = fs::temp_directory_path() / "mfglab_cli_ce_out";
  fs::remove_all(out);
  const auto o = run("run " + cfg.string() + " --out " + out.string() + " --seed 5 --threads 2");
  CHECK(o.code == 0);
  std::ifstream in(out / "counterexample.csv");
  const std::string csv((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(csv.find("2,0,-1.25,2,") != std::string::npos);
  CHECK(fs::exists(out / "manifest.json"));
  fs::remove_all(out);
}

TEST_CASE("malformed config exits 64 without artifacts") {
  const fs::path cfg = write("bad.json", "{\"kind\": \"counterexample\", ");
  const fs::path out = fs::temp_directory_path() / "mfglab_cli_bad_out";
  fs::remove_all(out);
  const auto o = run("run " + cfg.string() + " --out " + out.string());
  CHECK(o.code == 64);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("usage errors exit 64") {
  CHECK(run("").code == 64);
  CHECK(run("run").code == 64);
  CHECK(run("frobnicate").code == 64);
  CHECK(run("run x.json --threads 0").code == 64);
}

TEST_CASE("failing checks exit 2") {
  const fs::path cfg = write("mono.json", R"({"kind": "monotonicity", "model": {"dimension": 1},
    "data": {"phi": {"name": "quadratic", "lambda": 1}}, "params": {"propagation": false}})");
  const fs::path out = fs::temp_directory_path() / "mfglab_cli_mono_out";
  const auto o = run("run " + cfg.string() + " --out " + out.string());
  CHECK(o.code == 2);
  CHECK(o.out.find("FAIL") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("thread count falls back to the environment") {
  const fs::path cfg = write("env.json", R"({"kind": "counterexample"})");
  const fs::path out = fs::temp_directory_path() / "mfglab_cli_env_out";
  fs::remove_all(out);
  CHECK(run("run " + cfg.string() + " --out " + out.string(), "MFGLAB_THREADS=3").code == 0);
  std::ifstream in(out / "manifest.json");
  const std::string manifest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(manifest.find("\"threads\": 3") != std::string::npos);
  fs::remove_all(out);
}

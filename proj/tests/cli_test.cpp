#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const std::string kCli = ENKF_CLI_PATH;

fs::path temp_dir(const char* tag) {
  const fs::path p =
      fs::temp_directory_path() / (std::string("enkf_cli_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string base_config(const std::string& j_values,
                        const std::string& filter_name) {
  return R"({
  "model": {
    "dim_d": 1, "dim_k": 1,
    "a_matrix": [[0.9]], "b_vector": [0.0],
    "h_matrix": [[1.0]], "h_offset": [0.0],
    "sigma": [[0.5]], "gamma": [[0.5]]
  },
  "init": {"mean": [0.0], "cov": [[1.0]]},
  "trajectory": {"n_steps": 3, "seed": 42},
  "grid": {"cells": 800, "joint_y_cells": 256},
  "filter": {"name": ")"s +
         filter_name + R"(", "ensemble_size": 200},
  "sweep": {"j_values": )" +
         j_values +
         R"(, "n_replicates": 10, "test_functions": ["mean"]}
})";
}

}  // namespace

TEST_CASE("cli: verify passes the quick battery") {
  const fs::path dir = temp_dir("verify");
  const fs::path log = dir / "log.txt";
  const int code = run("verify --seed 1 --out " + dir.string(), log);
  CAPTURE(slurp(log));
  CHECK(code == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(slurp(log).find("[PASS]") != std::string::npos);
}

TEST_CASE("cli: simulate is seed-deterministic") {
  const fs::path dir = temp_dir("simulate");
  write_file(dir / "config.json", base_config("[16, 64, 256]", "grid"));
  const fs::path log = dir / "log.txt";
  const std::string cfg = " --config " + (dir / "config.json").string();

  REQUIRE(run("simulate" + cfg + " --out " + (dir / "a").string(), log) == 0);
  REQUIRE(run("simulate" + cfg + " --out " + (dir / "b").string(), log) == 0);
  CHECK(slurp(dir / "a" / "trajectory.csv") ==
        slurp(dir / "b" / "trajectory.csv"));

  REQUIRE(run("simulate" + cfg + " --seed 43 --out " + (dir / "c").string(),
              log) == 0);
  CHECK(slurp(dir / "a" / "trajectory.csv") !=
        slurp(dir / "c" / "trajectory.csv"));
  CHECK(fs::exists(dir / "a" / "manifest.json"));
}

TEST_CASE("cli: filter consumes a stored trajectory") {
  const fs::path dir = temp_dir("filter");
  write_file(dir / "config.json", base_config("[16, 64, 256]", "grid"));
  const fs::path log = dir / "log.txt";
  const std::string cfg = " --config " + (dir / "config.json").string();

  REQUIRE(run("simulate" + cfg + " --out " + (dir / "sim").string(), log) ==
          0);
  const int code =
      run("filter" + cfg + " --trajectory " +
              (dir / "sim" / "trajectory.csv").string() + " --out " +
              (dir / "out").string() + " --dump-density 2",
          log);
  CAPTURE(slurp(log));
  CHECK(code == 0);
  CHECK(fs::exists(dir / "out" / "posteriors.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(fs::exists(dir / "out" / "density_step_2.csv"));
}

TEST_CASE("cli: sweep artifacts and the plot round trip") {
  const fs::path dir = temp_dir("sweep");
  write_file(dir / "config.json", base_config("[16, 64, 256]", "grid"));
  const fs::path log = dir / "log.txt";
  const std::string cfg = " --config " + (dir / "config.json").string();

  const int code =
      run("sweep-j" + cfg + " --out " + (dir / "out").string(), log);
  CAPTURE(slurp(log));
  CHECK(code == 0);
  for (const char* name :
       {"results.csv", "report.json", "rates.svg", "manifest.json"}) {
    CHECK(fs::exists(dir / "out" / name));
  }

  const int plot_code =
      run("plot --results " + (dir / "out" / "results.csv").string() +
              " --out " + (dir / "plot").string(),
          log);
  CHECK(plot_code == 0);
  CHECK(slurp(dir / "plot" / "rates.svg") == slurp(dir / "out" / "rates.svg"));
}

TEST_CASE("cli: assert mode fails when no rate can be fitted") {
  const fs::path dir = temp_dir("assert");
  write_file(dir / "config.json", base_config("[2, 3]", "grid"));
  const fs::path log = dir / "log.txt";
  const int code = run("sweep-j --assert --config " +
                           (dir / "config.json").string() + " --out " +
                           (dir / "out").string(),
                       log);
  CAPTURE(slurp(log));
  CHECK(code == 1);
  CHECK(slurp(log).find("[FAIL]") != std::string::npos);
}

TEST_CASE("cli: config errors exit with the usage code") {
  const fs::path dir = temp_dir("badconfig");
  write_file(dir / "config.json", R"({"surprise": true})");
  const fs::path log = dir / "log.txt";
  const int code = run("simulate --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string(),
                       log);
  CHECK(code == 2);
  CHECK(slurp(log).find("surprise") != std::string::npos);

  // Unknown flags and missing subcommands are usage errors too.
  CHECK(run("simulate --config " + (dir / "config.json").string() +
                " --frobnicate",
            log) == 2);
  CHECK(run("", log) != 0);
}

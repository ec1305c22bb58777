#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "pw/dataset.hpp"
#include "test_util.hpp"

#ifndef PW_CLI_PATH
#error "PW_CLI_PATH must point at the built executable"
#endif

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("pw_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.log";
  const std::string cmd =
      std::string(PW_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult result;
#ifdef _WIN32
  result.code = raw;
#else
  result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#endif
  std::ifstream in(log);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// writes the dependent 2x2 dataset (with outcome) and returns its path
fs::path write_dataset(const fs::path& dir, int n = 400) {
  pw::Dataset ds = pwtest::discrete_2x2(n, /*with_outcome=*/true);
  const fs::path path = dir / "data.csv";
  pw::save_dataset(path.string(), ds);
  return path;
}

std::string data_flags(const fs::path& data, bool outcome) {
  std::string flags = "--data " + data.string() + " --covariates x1";
  if (outcome) flags += " --outcome y";
  return flags;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists the subcommands and exits cleanly") {
  fs::path dir = fresh_dir("help");
  CliResult r = run_cli("--help", dir);
  CHECK(r.code == 0);
  CHECK(r.output.find("weight") != std::string::npos);
  CHECK(r.output.find("estimate") != std::string::npos);
  CHECK(r.output.find("balance") != std::string::npos);
  CHECK(r.output.find("simulate") != std::string::npos);
}

TEST_CASE("weight writes csv and json artifacts") {
  fs::path dir = fresh_dir("weight");
  fs::path data = write_dataset(dir);
  CliResult r = run_cli("--seed 7 --out " + dir.string() + " weight " +
                            data_flags(data, false) +
                            " --method pw --replicates 20 --threads 1",
                        dir);
  CHECK(r.code == 0);
  const std::string csv = slurp(dir / "weights.csv");
  CHECK(csv.rfind("unit_index,weight", 0) == 0);
  // header plus one line per unit
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 401);
  const std::string json = slurp(dir / "weights.json");
  CHECK(json.find("\"subcommand\": \"weight\"") != std::string::npos);
  CHECK(json.find("\"master_seed\": 7") != std::string::npos);
  CHECK(json.find("\"method_tag\"") != std::string::npos);
}

TEST_CASE("weight runs are deterministic and thread-invariant") {
  fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), c = fresh_dir("det_c");
  fs::path data = write_dataset(a);
  fs::copy_file(data, b / "data.csv");
  fs::copy_file(data, c / "data.csv");
  CHECK(run_cli("--seed 3 --out " + a.string() + " weight " +
                    data_flags(a / "data.csv", false) +
                    " --method pw --replicates 16 --threads 1",
                a)
            .code == 0);
  CHECK(run_cli("--seed 3 --out " + b.string() + " weight " +
                    data_flags(b / "data.csv", false) +
                    " --method pw --replicates 16 --threads 1",
                b)
            .code == 0);
  CHECK(run_cli("--seed 3 --out " + c.string() + " weight " +
                    data_flags(c / "data.csv", false) +
                    " --method pw --replicates 16 --threads 4",
                c)
            .code == 0);
  CHECK(slurp(a / "weights.csv") == slurp(b / "weights.csv"));
  CHECK(slurp(a / "weights.csv") == slurp(c / "weights.csv"));
}

TEST_CASE("uniform weights are exactly one") {
  fs::path dir = fresh_dir("uniform");
  fs::path data = write_dataset(dir, 100);
  CHECK(run_cli("--out " + dir.string() + " weight " + data_flags(data, false) +
                    " --method uniform",
                dir)
            .code == 0);
  std::ifstream in(dir / "weights.csv");
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.substr(line.find(',') + 1) == "1");
    ++rows;
  }
  CHECK(rows == 100);
}

TEST_CASE("estimate recovers the raw difference in means under uniform") {
  fs::path dir = fresh_dir("estimate");
  fs::path data = write_dataset(dir);
  CliResult r = run_cli("--out " + dir.string() + " estimate " +
                            data_flags(data, true) +
                            " --method uniform --estimand ate",
                        dir);
  CHECK(r.code == 0);
  const std::string csv = slurp(dir / "estimate.csv");
  // raw arm means are 5.4 and 1.6 in this design
  const std::size_t comma = csv.find(",", csv.find('\n') + 1);
  const double value = std::stod(csv.substr(comma + 1));
  CHECK(value == doctest::Approx(3.8).epsilon(1e-9));
  CHECK(slurp(dir / "estimate.json").find("\"estimator_tag\"") !=
        std::string::npos);
}

TEST_CASE("estimate with permutation weights moves toward the balanced contrast") {
  fs::path dir = fresh_dir("estimate_pw");
  fs::path data = write_dataset(dir, 2000);
  CliResult r = run_cli("--seed 11 --out " + dir.string() + " estimate " +
                            data_flags(data, true) +
                            " --method pw --replicates 40 --threads 1 "
                            "--estimand ate --interval 0.9",
                        dir);
  CHECK(r.code == 0);
  const std::string json = slurp(dir / "estimate.json");
  CHECK(json.find("\"interval\": [") != std::string::npos);
  const std::string csv = slurp(dir / "estimate.csv");
  const double value =
      std::stod(csv.substr(csv.find(",", csv.find('\n') + 1) + 1));
  // balanced contrast is 2 for y = 1 + 2a + 3x; raw contrast is 3.8
  CHECK(std::abs(value - 2.0) < 0.35);
}

TEST_CASE("balance reports uniform-weight discrepancies") {
  fs::path dir = fresh_dir("balance");
  fs::path data = write_dataset(dir, 1000);
  CliResult r = run_cli("--out " + dir.string() + " balance " +
                            data_flags(data, false) + " --basis linear",
                        dir);
  CHECK(r.code == 0);
  const std::string csv = slurp(dir / "balance.csv");
  CHECK(csv.find("a*x1") != std::string::npos);
  // E[ax] - E[a]E[x] = 0.4 - 0.25 in this design
  const std::string json = slurp(dir / "balance.json");
  CHECK(json.find("\"max_discrepancy\": 0.15") != std::string::npos);
}

TEST_CASE("balance accepts a weights file and validates its length") {
  fs::path dir = fresh_dir("balance_w");
  fs::path data = write_dataset(dir, 500);
  // produce matching weights first
  CHECK(run_cli("--seed 5 --out " + dir.string() + " weight " +
                    data_flags(data, false) +
                    " --method pw --replicates 30 --threads 1",
                dir)
            .code == 0);
  CliResult ok = run_cli("--out " + dir.string() + " balance " +
                             data_flags(data, false) + " --weights " +
                             (dir / "weights.csv").string(),
                         dir);
  CHECK(ok.code == 0);

  // a truncated weights file must be rejected as a usage error
  std::ofstream bad(dir / "short.csv");
  bad << "unit_index,weight\n0,1\n1,1\n";
  bad.close();
  CliResult mismatch = run_cli("--out " + dir.string() + " balance " +
                                   data_flags(data, false) + " --weights " +
                                   (dir / "short.csv").string(),
                               dir);
  CHECK(mismatch.code == 1);
  CHECK(mismatch.output.find("does not match") != std::string::npos);
}

TEST_CASE("simulate writes the study artifacts and the console table") {
  fs::path dir = fresh_dir("simulate");
  CliResult r = run_cli(
      "--seed 2 --out " + dir.string() +
          " simulate --dgp ks-binary --n 100 --sims 2 "
          "--methods unweighted,oracle --estimators model-free "
          "--pw-replicates 2 --threads 1",
      dir);
  CHECK(r.code == 0);
  CHECK(r.output.find("oracle-weights") != std::string::npos);
  CHECK(r.output.find("irmse") != std::string::npos);
  const std::string csv = slurp(dir / "simulation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
  const std::string curves = slurp(dir / "simulation_curves.csv");
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 5);  // 2 rows x 2 doses
  CHECK(slurp(dir / "simulation.json").find("\"dgp\": \"ks-binary\"") !=
        std::string::npos);
}

TEST_CASE("usage and io failures map to distinct exit codes") {
  fs::path dir = fresh_dir("errors");
  fs::path data = write_dataset(dir, 100);

  CliResult missing = run_cli("--out " + dir.string() +
                                  " weight --data " + (dir / "nope.csv").string() +
                                  " --covariates x1",
                              dir);
  CHECK(missing.code == 2);
  CHECK(missing.output.find("io error") != std::string::npos);

  CliResult bad_method = run_cli("--out " + dir.string() + " weight " +
                                     data_flags(data, false) +
                                     " --method banana",
                                 dir);
  CHECK(bad_method.code == 1);
  CHECK(bad_method.output.find("usage error") != std::string::npos);

  CliResult bad_column = run_cli("--out " + dir.string() + " weight " +
                                     data_flags(data, false) +
                                     " --treatment missing_column",
                                 dir);
  CHECK(bad_column.code == 1);

  CliResult bad_out = run_cli(
      "--out " + (dir / "does/not/exist").string() + " weight " +
          data_flags(data, false) + " --method uniform",
      dir);
  CHECK(bad_out.code == 2);

  CliResult bad_estimand = run_cli("--out " + dir.string() + " estimate " +
                                       data_flags(data, true) +
                                       " --method uniform "
                                       "--estimand dose-response",
                                   dir);
  CHECK(bad_estimand.code == 1);

  CliResult bad_interval = run_cli("--out " + dir.string() + " estimate " +
                                       data_flags(data, true) +
                                       " --method uniform --estimand ate "
                                       "--interval 0.9",
                                   dir);
  CHECK(bad_interval.code == 1);

  CliResult no_subcommand = run_cli("--seed 4", dir);
  CHECK(no_subcommand.code == 1);
}

}  // TEST_SUITE

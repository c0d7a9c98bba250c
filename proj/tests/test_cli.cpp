#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "uwqsim/serialize.hpp"

namespace fs = std::filesystem;
using uwq::ojson;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string quoted(const std::string& s) { return "'" + s + "'"; }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "uwqsim_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(UWQSIM_CLI_PATH) + " " + args + " > " +
                          quoted(out_file.string()) + " 2> " +
                          quoted(err_file.string());
  const int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = uwq::read_text_file(out_file);
  res.err = uwq::read_text_file(err_file);
  return res;
}

std::string fixture(const std::string& name) {
  return (fs::path(UWQSIM_FIXTURES_DIR) / name).string();
}

}  // namespace

TEST_CASE("link-budget reports the preset loss budget", "[cli]") {
  const fs::path dir = scratch_dir("budget");
  const CliResult res = run_cli("link-budget --preset paper55m", dir);
  REQUIRE(res.exit_code == 0);
  const ojson j = ojson::parse(res.out);
  REQUIRE(j["channel_db"].get<double>() ==
          Catch::Approx(38.217914407486163).margin(1e-9));
  REQUIRE(j["total_db"].get<double>() ==
          Catch::Approx(40.017914407486161).margin(1e-9));
  REQUIRE(j["expected_signal_rate_hz"].get<double>() ==
          Catch::Approx(11054.307417611632).epsilon(1e-9));
}

TEST_CASE("csv output renders flat key,value rows", "[cli]") {
  const fs::path dir = scratch_dir("budget_csv");
  const CliResult res =
      run_cli("link-budget --preset paper55m --format csv", dir);
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.rfind("key,value\n", 0) == 0);
  REQUIRE(res.out.find("channel_db,") != std::string::npos);
}

TEST_CASE("state-tomo reconstructs the fixture state", "[cli]") {
  const fs::path dir = scratch_dir("state_tomo");
  const CliResult res = run_cli(
      "state-tomo --input " + quoted(fixture("noiseless_D.csv")) +
          " --reference D",
      dir);
  REQUIRE(res.exit_code == 0);
  const ojson j = ojson::parse(res.out);
  REQUIRE(j["fidelity"].get<double>() == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(j["purity"].get<double>() == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(j["bloch"][0].get<double>() == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("state-tomo validates the row count", "[cli]") {
  const fs::path dir = scratch_dir("state_tomo_rows");
  const fs::path bad = dir / "two_rows.csv";
  uwq::write_text_file(bad, std::string(uwq::kCountCsvHeader) +
                                "\n0,10,10,1\n0.39,10,10,1\n");
  const CliResult res =
      run_cli("state-tomo --input " + quoted(bad.string()), dir);
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.err.find("exactly 3 records") != std::string::npos);
}

TEST_CASE("process-tomo recovers the identity process", "[cli]") {
  const fs::path dir = scratch_dir("process_tomo");
  const CliResult res = run_cli(
      "process-tomo --input " + quoted(fixture("identity_pairs.json")), dir);
  REQUIRE(res.exit_code == 0);
  const ojson j = ojson::parse(res.out);
  REQUIRE(j["fidelity_to_ideal"].get<double>() ==
          Catch::Approx(1.0).margin(1e-9));
  REQUIRE(j["chi"]["re"][0][0].get<double>() ==
          Catch::Approx(1.0).margin(1e-9));
  REQUIRE(j["chi_polar"]["modulus"][0][0].get<double>() ==
          Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("fit-visibility fits a generated scan", "[cli]") {
  const fs::path dir = scratch_dir("fit");
  std::string csv = "angle_rad,counts\n";
  for (int k = 0; k <= 12; ++k) {
    const double t = k * M_PI / 12.0;
    const double v = 5500.0 * std::cos(2.0 * t) + 6100.0;
    csv += uwq::detail::format_double(t) + "," +
           uwq::detail::format_double(v) + "\n";
  }
  const fs::path file = dir / "scan.csv";
  uwq::write_text_file(file, csv);
  const CliResult res =
      run_cli("fit-visibility --input " + quoted(file.string()), dir);
  REQUIRE(res.exit_code == 0);
  const ojson j = ojson::parse(res.out);
  REQUIRE(j["visibility"].get<double>() ==
          Catch::Approx(5500.0 / 6100.0).margin(1e-9));
  REQUIRE(j["offset"].get<double>() == Catch::Approx(6100.0).margin(1e-6));
}

TEST_CASE("unknown config keys abort with the offending path", "[cli]") {
  const fs::path dir = scratch_dir("bad_key");
  const fs::path cfg = dir / "bad.json";
  uwq::write_text_file(cfg, "{\"link\": {\"bogus\": 1}}\n");
  const CliResult res =
      run_cli("run --config " + quoted(cfg.string()), dir);
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.err.find("link.bogus") != std::string::npos);
}

TEST_CASE("missing input files exit with the I/O code", "[cli]") {
  const fs::path dir = scratch_dir("missing");
  const CliResult res = run_cli(
      "state-tomo --input " + quoted((dir / "nope.csv").string()), dir);
  REQUIRE(res.exit_code == 4);
}

TEST_CASE("missing subcommand is a usage error", "[cli]") {
  const fs::path dir = scratch_dir("usage");
  REQUIRE(run_cli("", dir).exit_code == 2);
  REQUIRE(run_cli("--version", dir).exit_code == 0);
}

TEST_CASE("run emits identical artifacts for identical inputs", "[cli]") {
  const fs::path dir = scratch_dir("determinism");
  const fs::path cfg = dir / "plan.json";
  uwq::write_text_file(cfg,
                       "{\"preset\": \"paper55m\",\n"
                       " \"tomography\": {\"duration_s\": 0.5},\n"
                       " \"scan\": {\"duration_s\": 0.25}}\n");

  const std::string base =
      "run --config " + quoted(cfg.string()) + " --seed 5 --out ";
  const CliResult first =
      run_cli(base + quoted((dir / "out1").string()), dir);
  REQUIRE(first.exit_code == 0);
  const CliResult second =
      run_cli(base + quoted((dir / "out2").string()), dir);
  REQUIRE(second.exit_code == 0);

  for (const char* name : {"report.json", "counts_H.csv", "scan_V.csv"}) {
    const std::string a = uwq::read_text_file(dir / "out1" / name);
    const std::string b = uwq::read_text_file(dir / "out2" / name);
    REQUIRE(a == b);
  }

  // the run artifacts feed straight back into fit-visibility
  const CliResult refit = run_cli(
      "fit-visibility --input " +
          quoted((dir / "out1" / "scan_V.csv").string()) + " --port r",
      dir);
  REQUIRE(refit.exit_code == 0);
  REQUIRE(ojson::parse(refit.out)["visibility"].get<double>() > 0.5);
}

TEST_CASE("simulate writes count CSVs with the documented header", "[cli]") {
  const fs::path dir = scratch_dir("simulate");
  const fs::path cfg = dir / "plan.json";
  uwq::write_text_file(
      cfg,
      "{\"preset\": \"paper55m\",\n"
      " \"tomography\": {\"duration_s\": 0.2},\n"
      " \"scan\": {\"duration_s\": 0.1}}\n");
  const CliResult res = run_cli("simulate --config " + quoted(cfg.string()) +
                                    " --out " + quoted((dir / "o").string()),
                                dir);
  REQUIRE(res.exit_code == 0);
  const std::string counts = uwq::read_text_file(dir / "o" / "counts_H.csv");
  REQUIRE(counts.rfind(std::string(uwq::kCountCsvHeader) + "\n", 0) == 0);
  REQUIRE(fs::exists(dir / "o" / "counts.json"));
  REQUIRE(fs::exists(dir / "o" / "scan_D.csv"));
}

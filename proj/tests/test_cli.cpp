#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gkdv/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

// scratch directory per test run, wiped up front so reruns start clean
fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "gkdv_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_tool(const std::string& args) {
  const std::string cmd =
      std::string(GKDV_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

nlohmann::json report_at(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(slurp(path));
  gkdv::validate_report(j);
  return j;
}

double scalar(const nlohmann::json& rep, const std::string& name) {
  REQUIRE(rep["scalars"].contains(name));
  return rep["scalars"][name]["value"].get<double>();
}

} // namespace

TEST_CASE("ground state subcommand reports the closed-form identities") {
  const fs::path out = scratch() / "gs";
  REQUIRE(run_tool("groundstate --p 5 --check-identities --out " + out.string()) == 0);

  nlohmann::json rep = report_at(out / "groundstate_report.json");
  CHECK(rep["subcommand"] == "groundstate");
  CHECK(rep["status"] == "ok");
  CHECK(rep["config"]["p"] == "5");

  // mass over squared L1 norm of the quintic ground state
  CHECK_THAT(scalar(rep, "mass_l1_ratio"),
             Catch::Matchers::WithinAbs(0.22847329752093673, 1e-6));
  CHECK(scalar(rep, "ode_residual") < 1e-10);
  CHECK(scalar(rep, "kernel_residual") < 1e-8);
  CHECK(scalar(rep, "scaling_identity_residual") < 1e-8);

  const std::string csv = slurp(out / "groundstate_profile.csv");
  CHECK_THAT(csv, Catch::Matchers::StartsWith("y,Q\n"));
}

TEST_CASE("profile subcommand localizes and reports the detuning pairing") {
  const fs::path out = scratch() / "pf";
  REQUIRE(run_tool("profile --p 5.1 --b 0.0228 --bc 0.0228 --localize --out " +
                   out.string()) == 0);

  nlohmann::json rep = report_at(out / "profile_report.json");
  // the quoted reference digits and our h -> 0 limit differ by ~2e-8
  CHECK_THAT(scalar(rep, "gamma"), Catch::Matchers::WithinAbs(-0.5125334488, 5e-8));
  CHECK(scalar(rep, "profile_residual") < 1e-8);
  CHECK(scalar(rep, "detuning_pairing") > 0.0);
  CHECK(std::abs(scalar(rep, "localized_energy")) < 1e-3);
  CHECK(fs::exists(out / "profile_solution.csv"));
  CHECK(fs::exists(out / "localized_profile.csv"));
}

TEST_CASE("evolve subcommand conserves the soliton invariants") {
  const fs::path out = scratch() / "ev";
  const fs::path cfg = scratch() / "ev.cfg";
  std::ofstream(cfg) << "p = 5\nic = soliton\nspeed = 1\nx0 = 0\n"
                     << "x_min = -50\nx_max = 50\nn = 1024\nt_end = 0.1\ndt = 1e-3\n";
  REQUIRE(run_tool("evolve --config " + cfg.string() + " --out " + out.string()) == 0);

  nlohmann::json rep = report_at(out / "evolve_report.json");
  CHECK(scalar(rep, "mass_drift") < 1e-6);
  CHECK(scalar(rep, "energy_drift") < 1e-6);
  CHECK(scalar(rep, "t_final") == 0.1);
  const std::string csv = slurp(out / "evolve_diagnostics.csv");
  CHECK_THAT(csv, Catch::Matchers::StartsWith("t,mass,energy,e2,grad_norm\n"));
}

TEST_CASE("sync subcommand matches the closed-form scale ratio") {
  const fs::path out = scratch() / "sy";
  REQUIRE(run_tool("sync --k 2 --runner reduced --b 0.02,0.16 --out " + out.string()) ==
          0);

  nlohmann::json rep = report_at(out / "sync_report.json");
  const double l1 = scalar(rep, "lambda_1_star");
  const double l2 = scalar(rep, "lambda_2_star");
  CHECK(l1 == 1.0);
  // b2/b1 = 8, so the second bubble must start exactly twice as large
  CHECK_THAT(l2, Catch::Matchers::WithinAbs(2.0 * l1, 1e-9));
  CHECK(scalar(rep, "runner_calls") > 0.0);
  CHECK(rep["payload"]["history"].is_array());
  CHECK(!rep["payload"]["history"].empty());
}

TEST_CASE("place subcommand hits the requested blow-up set") {
  const fs::path out = scratch() / "pl";
  REQUIRE(run_tool("place --targets 0,300 --runner reduced --out " + out.string()) == 0);

  nlohmann::json rep = report_at(out / "place_report.json");
  CHECK(rep["payload"]["converged"] == true);
  CHECK(scalar(rep, "iterations") <= 5.0);
  CHECK_THAT(scalar(rep, "target_1_achieved"), Catch::Matchers::WithinAbs(0.0, 1e-3));
  CHECK_THAT(scalar(rep, "target_2_achieved"), Catch::Matchers::WithinAbs(300.0, 1e-3));

  nlohmann::json verify = report_at(out / "place_verification.json");
  const double t1 = scalar(verify, "bubble_1_T");
  const double t2 = scalar(verify, "bubble_2_T");
  CHECK_THAT(t2, Catch::Matchers::WithinRel(t1, 1e-6));
  CHECK(scalar(verify, "bubble_1_fit_r2") > 0.999);
}

TEST_CASE("identical invocations produce byte-identical outputs") {
  const fs::path a = scratch() / "det_a";
  const fs::path b = scratch() / "det_b";
  const std::string args = "sync --k 2 --runner reduced --b 0.02,0.16 --out ";
  REQUIRE(run_tool(args + a.string()) == 0);
  REQUIRE(run_tool(args + b.string()) == 0);
  CHECK(slurp(a / "sync_report.json") == slurp(b / "sync_report.json"));
  CHECK(slurp(a / "sync_history.csv") == slurp(b / "sync_history.csv"));
}

TEST_CASE("bad invocations map to the documented exit codes") {
  SECTION("unknown flag is a usage error") {
    CHECK(run_tool("evolve --no-such-flag") == 2);
  }
  SECTION("unknown config key is a usage error") {
    const fs::path cfg = scratch() / "bad.cfg";
    std::ofstream(cfg) << "p = 5\nic = soliton\nbogus_key = 1\n";
    CHECK(run_tool("evolve --config " + cfg.string() + " --out " +
                   (scratch() / "bad_out").string()) == 2);
  }
  SECTION("malformed config value is a usage error") {
    const fs::path cfg = scratch() / "nan.cfg";
    std::ofstream(cfg) << "ic = soliton\nt_end = banana\n";
    CHECK(run_tool("evolve --config " + cfg.string() + " --out " +
                   (scratch() / "nan_out").string()) == 2);
  }
  SECTION("missing required option is a usage error") {
    CHECK(run_tool("sync --k 2 --runner reduced") == 2);
  }
  SECTION("drift list length must match the bubble count") {
    CHECK(run_tool("sync --k 3 --runner reduced --b 0.02,0.16") == 2);
  }
  SECTION("out-of-range model parameter is a domain error") {
    CHECK(run_tool("groundstate --p 7") == 1);
  }
  SECTION("no subcommand is a usage error") {
    CHECK(run_tool("") == 2);
  }
  SECTION("help exits cleanly") {
    CHECK(run_tool("--help") == 0);
    CHECK(run_tool("sync --help") == 0);
  }
}

TEST_CASE("environment thread override is validated and echoed") {
  const fs::path out = scratch() / "thr";
  const std::string base = "groundstate --p 5 --out " + out.string();
  {
    const std::string cmd = std::string("GKDV_THREADS=abc ") + GKDV_TOOL_PATH + " " +
                            base + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 2);
  }
  {
    const std::string cmd = std::string("GKDV_THREADS=4 ") + GKDV_TOOL_PATH + " " + base +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 0);
    nlohmann::json rep = report_at(out / "groundstate_report.json");
    CHECK(rep["config"]["threads"] == "4");
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mergeopf/io.hpp"
#include "mergeopf/scenario.hpp"

using namespace mergeopf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out, err;
};

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "mergeopf_cli_tests";
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path dir = work_dir();
  const std::string out_file = (dir / "stdout.txt").string();
  const std::string err_file = (dir / "stderr.txt").string();
  const std::string cmd =
      std::string(MERGEOPF_CLI) + " " + args + " > " + out_file + " 2> " + err_file;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(raw);
  std::ostringstream os, es;
  os << std::ifstream(out_file).rdbuf();
  es << std::ifstream(err_file).rdbuf();
  r.out = os.str();
  r.err = es.str();
  return r;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("generate is byte-for-byte reproducible") {
  const fs::path dir = work_dir();
  const RunResult a =
      run_cli("generate --seed 7 --dacf-areas 2 --out " + (dir / "gen_a").string());
  const RunResult b =
      run_cli("generate --seed 7 --dacf-areas 2 --out " + (dir / "gen_b").string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  auto slurp = [](const fs::path& p) {
    std::ostringstream ss;
    ss << std::ifstream(p).rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "gen_a/network.json") == slurp(dir / "gen_b/network.json"));
  CHECK(slurp(dir / "gen_a/ground_truth.json") == slurp(dir / "gen_b/ground_truth.json"));
}

TEST_CASE("merge of a consistent scenario exits clean with zero counts") {
  const fs::path dir = work_dir() / "consistent";
  REQUIRE(run_cli("generate --seed 3 --dacf-areas 1 --desync-sigma 0 --dacf-sigma 0 "
                  "--target-skew-mw 0 --out " + dir.string()).exit_code == 0);
  const RunResult r = run_cli("merge --input " + (dir / "network.json").string() + " --out " +
                              (dir / "merged").string());
  CHECK(r.exit_code == 0);
  const json result = read_json(dir / "merged/merge_result.json");
  for (const char* key :
       {"interco_sn_sn", "interco_sn_dacf", "v_sn", "v_dacf", "loads_act_sn", "loads_rea_sn"})
    CHECK(result["indicators"][key]["violating"].get<int>() == 0);
  CHECK(result["stages"].size() == 4);
  CHECK(result["feasibility"]["max_residual_pu"].get<double>() <= 1e-8);
  CHECK(result["config"]["huber_delta_mw"].get<double>() == 5.0);
  // report files exist
  for (const char* f : {"state.json", "indicators.json", "profiles_interconnections.csv",
                        "profiles_voltages.csv", "profiles_loads.csv", "audit.log"})
    CHECK(fs::exists(dir / "merged" / f));
}

TEST_CASE("indicator command agrees with the merge report") {
  const fs::path dir = work_dir() / "crosscheck";
  REQUIRE(run_cli("generate --seed 5 --dacf-areas 2 --out " + dir.string()).exit_code == 0);
  REQUIRE(run_cli("merge --input " + (dir / "network.json").string() + " --out " +
                  (dir / "merged").string()).exit_code == 0);
  const RunResult r =
      run_cli("indicators --input " + (dir / "network.json").string() + " --state " +
              (dir / "merged/state.json").string() + " --out " + (dir / "ind").string());
  REQUIRE(r.exit_code == 0);
  const json from_merge = read_json(dir / "merged/merge_result.json")["indicators"];
  const json standalone = read_json(dir / "ind/indicators.json");
  for (const char* key :
       {"interco_sn_sn", "interco_sn_dacf", "v_sn", "v_dacf", "loads_act_sn", "loads_rea_sn"}) {
    CHECK(standalone[key]["violating"] == from_merge[key]["violating"]);
    CHECK(standalone[key]["population"] == from_merge[key]["population"]);
  }
}

TEST_CASE("weighted mode runs") {
  const fs::path dir = work_dir() / "weighted";
  REQUIRE(run_cli("generate --seed 9 --dacf-areas 1 --out " + dir.string()).exit_code == 0);
  const RunResult r =
      run_cli("merge --mode weighted --weights 1,1,1,1 --input " +
              (dir / "network.json").string() + " --out " + (dir / "merged").string());
  CHECK(r.exit_code == 0);
  const json result = read_json(dir / "merged/merge_result.json");
  CHECK(result["stages"].size() == 1);
  CHECK(result["stages"][0]["stage"] == "weighted");
}

TEST_CASE("corrupt document exits 2 naming the line") {
  const fs::path dir = work_dir();
  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{\n \"version\": 1,\n broken\n}\n";
  const RunResult r =
      run_cli("merge --input " + bad.string() + " --out " + (dir / "badout").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line") != std::string::npos);
}

TEST_CASE("missing input exits 2, usage problems exit 1") {
  const fs::path dir = work_dir();
  CHECK(run_cli("merge --input /nonexistent.json --out " + dir.string()).exit_code == 2);
  CHECK(run_cli("merge").exit_code == 1);                     // missing required flag
  CHECK(run_cli("").exit_code == 1);                          // missing subcommand
  CHECK(run_cli("batch --input '" + (dir / "nothing_matches_*.json").string() + "' --out " +
                dir.string()).exit_code == 1);                 // empty glob
  CHECK(run_cli("merge --input x.json --mode nonsense").exit_code == 1);
}

TEST_CASE("batch merges every matching document and attributes failures") {
  const fs::path dir = work_dir() / "batch";
  fs::remove_all(dir);
  fs::create_directories(dir / "inputs");
  for (int seed = 1; seed <= 4; ++seed) {
    ScenarioSpec spec;
    spec.seed = static_cast<uint64_t>(seed);
    spec.dacf_areas = {2};
    const Scenario sc = generate(spec);
    write_file((dir / "inputs" / ("case_" + std::to_string(seed) + ".json")).string(),
               serialize_network(sc.network));
  }
  SUBCASE("all healthy") {
    const RunResult r = run_cli("batch --input '" + (dir / "inputs/case_*.json").string() +
                                "' --jobs 2 --out " + (dir / "out").string());
    CHECK(r.exit_code == 0);
    const json summary = read_json(dir / "out/batch_summary.json");
    CHECK(summary["n_situations"] == 4);
    CHECK(summary["success_rate"].get<double>() == 1.0);
    CHECK(fs::exists(dir / "out/case_2/merge_result.json"));
  }
  SUBCASE("one deliberately infeasible situation") {
    ScenarioSpec spec;
    spec.seed = 5;
    spec.dacf_areas = {2};
    Scenario sc = generate(spec);
    sc.network.loads[0].p_target = 6000.0;  // beyond any transfer capability
    sc.network.finalize();
    write_file((dir / "inputs/case_5.json").string(), serialize_network(sc.network));
    const RunResult r = run_cli("batch --input '" + (dir / "inputs/case_*.json").string() +
                                "' --jobs 2 --out " + (dir / "out_bad").string());
    CHECK(r.exit_code == 3);
    const json summary = read_json(dir / "out_bad/batch_summary.json");
    CHECK(summary["n_situations"] == 5);
    CHECK(summary["n_failures"] == 1);
    CHECK(summary["success_rate"].get<double>() == doctest::Approx(0.8));
    bool attributed = false;
    for (const auto& s : summary["situations"])
      if (!s["success"].get<bool>()) {
        CHECK(s["input"].get<std::string>().find("case_5") != std::string::npos);
        attributed = true;
      }
    CHECK(attributed);
    fs::remove(dir / "inputs/case_5.json");
  }
}

TEST_CASE("degrade flag emits the robustness companion document") {
  const fs::path dir = work_dir() / "degrade";
  const RunResult r =
      run_cli("generate --seed 11 --dacf-areas 3 --degrade A1 --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  const Network degraded = read_network_file((dir / "network_degraded.json").string());
  CHECK(degraded.areas[degraded.idx.area.at("A1")].reliability == Reliability::DACF);
  const json meta = read_json(dir / "scenario.json");
  CHECK(meta["degraded_area"] == "A1");
}

// Batch-oriented frontend: merge runs, weighted baselines, indicator
// reports, scenario generation and multi-situation batches.
//
// Exit codes: 0 success, 1 usage/config error, 2 input error,
// 3 solver/stage failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "mergeopf/hierarchy.hpp"
#include "mergeopf/io.hpp"
#include "mergeopf/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mergeopf;

namespace {

struct CliConfig {
  std::string input;
  std::string state_path;
  std::string out_dir = ".";
  std::string mode = "hierarchical";
  std::string weights_csv = "1,1,1,1";
  std::string thresholds_csv;
  std::string schedule_csv;
  double tol_flow_mw = 1.0;
  double tol_v_kv = 0.01;
  double tol_load_mw = 0.1;
  double tol_load_mvar = -1.0;  // defaults to tol_load_mw
  double huber_delta_mw = 5.0;
  bool exclude_dacf_pv = false;
  // scenario knobs
  uint64_t seed = 1;
  int areas = 4;
  int buses_per_area = 15;
  std::string dacf_areas_csv = "";
  double desync_sigma = 0.01;
  double dacf_sigma = 0.05;
  double target_skew_mw = 4.0;
  std::string degrade_area_id;
  int jobs = 0;
};

std::vector<double> parse_csv_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

MergeOptions make_options(const CliConfig& cfg) {
  MergeOptions opts;
  opts.tol.eps_flow_mw = cfg.tol_flow_mw;
  opts.tol.eps_v_kv = cfg.tol_v_kv;
  opts.tol.eps_load_mw = cfg.tol_load_mw;
  opts.tol.eps_load_mvar = cfg.tol_load_mvar >= 0.0 ? cfg.tol_load_mvar : cfg.tol_load_mw;
  opts.huber_delta_mw = cfg.huber_delta_mw;
  opts.dacf_pv_in_voltage_objective = !cfg.exclude_dacf_pv;
  if (!cfg.thresholds_csv.empty()) {
    const auto t = parse_csv_numbers(cfg.thresholds_csv);
    if (t.size() != 4)
      throw CLI::ValidationError("--thresholds expects flow_mw,v_kv,p_mw,q_mvar");
    opts.thresholds.flow_mw = t[0];
    opts.thresholds.v_kv = t[1];
    opts.thresholds.p_mw = t[2];
    opts.thresholds.q_mvar = t[3];
  }
  return opts;
}

std::vector<StageSpec> make_schedule(const CliConfig& cfg, const MergeOptions& opts) {
  if (cfg.schedule_csv.empty()) return default_schedule(opts.tol);
  std::vector<StageSpec> schedule;
  std::stringstream ss(cfg.schedule_csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "interco")
      schedule.push_back({StageName::Interco, ObjectiveId::Interco, opts.tol.eps_flow_mw, 0.0});
    else if (name == "voltage")
      schedule.push_back({StageName::Voltage, ObjectiveId::Voltage, opts.tol.eps_v_kv, 0.0});
    else if (name == "sn_load")
      schedule.push_back({StageName::SnLoad, ObjectiveId::SnLoad, opts.tol.eps_load_mw,
                          opts.tol.eps_load_mvar});
    else if (name == "dacf_load")
      schedule.push_back({StageName::DacfLoad, ObjectiveId::DacfLoad, 0.0, 0.0});
    else
      throw CLI::ValidationError("unknown stage '" + name + "'");
  }
  if (schedule.empty()) throw CLI::ValidationError("--schedule is empty");
  return schedule;
}

json config_json(const CliConfig& cfg, const MergeOptions& opts) {
  return json{{"mode", cfg.mode},
              {"input", cfg.input},
              {"weights", cfg.weights_csv},
              {"schedule", cfg.schedule_csv.empty()
                               ? "interco,voltage,sn_load,dacf_load"
                               : cfg.schedule_csv},
              {"tol_flow_mw", opts.tol.eps_flow_mw},
              {"tol_v_kv", opts.tol.eps_v_kv},
              {"tol_load_mw", opts.tol.eps_load_mw},
              {"tol_load_mvar", opts.tol.eps_load_mvar},
              {"huber_delta_mw", opts.huber_delta_mw},
              {"dacf_pv_in_voltage_objective", opts.dacf_pv_in_voltage_objective},
              {"thresholds",
               {{"flow_mw", opts.thresholds.flow_mw},
                {"v_kv", opts.thresholds.v_kv},
                {"p_mw", opts.thresholds.p_mw},
                {"q_mvar", opts.thresholds.q_mvar},
                {"v_secondary_kv", opts.thresholds.v_secondary_kv}}},
              {"nlp", {{"tol_feas", opts.nlp.tol_feas},
                       {"tol_opt", opts.nlp.tol_opt},
                       {"max_outer", opts.nlp.max_outer},
                       {"max_inner", opts.nlp.max_inner}}}};
}

json pair_json(const CountPair& p) {
  return json{{"violating", p.violating}, {"population", p.population}};
}

json indicators_json(const IndicatorReport& rep) {
  return json{
      {"interco_sn_sn", pair_json(rep.interco_sn_sn)},
      {"interco_sn_dacf", pair_json(rep.interco_sn_dacf)},
      {"v_sn", pair_json(rep.v_sn)},
      {"v_dacf", pair_json(rep.v_dacf)},
      {"loads_act_sn", pair_json(rep.loads_act_sn)},
      {"loads_rea_sn", pair_json(rep.loads_rea_sn)},
      {"v_sn_secondary", pair_json(rep.v_sn_secondary)},
      {"v_dacf_secondary", pair_json(rep.v_dacf_secondary)},
      {"max_deviation",
       {{"interco_sn_sn_mw", rep.max_dev_interco_sn_sn_mw},
        {"interco_sn_dacf_mw", rep.max_dev_interco_sn_dacf_mw},
        {"v_sn_kv", rep.max_dev_v_sn_kv},
        {"v_dacf_kv", rep.max_dev_v_dacf_kv},
        {"load_p_mw", rep.max_dev_load_p_mw},
        {"load_q_mvar", rep.max_dev_load_q_mvar}}},
      {"thresholds",
       {{"flow_mw", rep.thresholds.flow_mw},
        {"v_kv", rep.thresholds.v_kv},
        {"p_mw", rep.thresholds.p_mw},
        {"q_mvar", rep.thresholds.q_mvar},
        {"v_secondary_kv", rep.thresholds.v_secondary_kv}}}};
}

json stage_json(const StageRecord& rec) {
  return json{{"stage", rec.label},
              {"objective", to_string(rec.objective)},
              {"status", to_string(rec.status)},
              {"outer_iterations", rec.outer_iterations},
              {"inner_iterations", rec.inner_iterations},
              {"objective_at_optimum", rec.objective_at_optimum},
              {"objective_at_final", rec.objective_at_final},
              {"monotonicity_bound", rec.monotonicity_bound},
              {"constraint_violation", rec.constraint_violation},
              {"kkt_stationarity", rec.kkt_stationarity},
              {"freeze_count", rec.freezes.size()}};
}

void write_profiles(const Network& net, const NetworkState& state, const fs::path& dir) {
  const DeviationProfiles profiles = deviation_profiles(net, state);
  {
    std::ofstream out(dir / "profiles_interconnections.csv");
    out << "branch_id,flow_mw,target_from_mw,target_to_mw,deviation_mw,category\n";
    for (const auto& r : profiles.interconnections)
      out << r.branch_id << ',' << r.flow_mw << ',' << r.target_from_mw << ',' << r.target_to_mw
          << ',' << r.deviation_mw << ',' << r.category << '\n';
  }
  {
    std::ofstream out(dir / "profiles_voltages.csv");
    out << "bus_id,v_kv,v_target_kv,deviation_kv,reliability\n";
    for (const auto& r : profiles.voltages)
      out << r.bus_id << ',' << r.v_kv << ',' << r.v_target_kv << ',' << r.deviation_kv << ','
          << r.reliability << '\n';
  }
  {
    std::ofstream out(dir / "profiles_loads.csv");
    out << "load_id,dp_mw,dq_mvar,reliability\n";
    for (const auto& r : profiles.loads)
      out << r.load_id << ',' << r.dp_mw << ',' << r.dq_mvar << ',' << r.reliability << '\n';
  }
}

struct MergeRunReport {
  bool success = false;
  std::string error;
  std::string failed_stage;
  double wall_ms = 0.0;
  json result;
};

// Runs one merge and writes the full report set into out_dir.
MergeRunReport run_merge_once(const CliConfig& cfg, const Network& net, const fs::path& out_dir) {
  MergeRunReport report;
  const MergeOptions opts = make_options(cfg);
  fs::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    MergeResult result;
    if (cfg.mode == "weighted") {
      const auto w = parse_csv_numbers(cfg.weights_csv);
      if (w.size() != 4) throw CLI::ValidationError("--weights expects four comma-separated values");
      result = merge_weighted(net, {w[0], w[1], w[2], w[3]}, opts);
    } else {
      result = merge(net, make_schedule(cfg, opts), opts);
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    // feasibility cross-check with the load-flow validator
    Residual res;
    residual(net, result.final_state, res);
    const double max_res = std::max(res.p.cwiseAbs().maxCoeff(), res.q.cwiseAbs().maxCoeff());
    double lf_max_dv = -1.0;
    int lf_iters = -1;
    try {
      LoadFlowResult lf = newton_load_flow(net, result.final_state);
      lf_max_dv = (lf.state.v - result.final_state.v).cwiseAbs().maxCoeff();
      lf_iters = lf.iterations;
    } catch (const Error&) {
      // left as -1: the state failed the validator
    }

    json doc;
    doc["config"] = config_json(cfg, opts);
    doc["stages"] = json::array();
    for (const auto& rec : result.per_stage) doc["stages"].push_back(stage_json(rec));
    doc["objectives_at_final"] = {
        {"interco", evaluate_objective(net, ObjectiveId::Interco, result.final_state, opts)},
        {"voltage", evaluate_objective(net, ObjectiveId::Voltage, result.final_state, opts)},
        {"sn_load", evaluate_objective(net, ObjectiveId::SnLoad, result.final_state, opts)},
        {"dacf_load", evaluate_objective(net, ObjectiveId::DacfLoad, result.final_state, opts)}};
    doc["indicators"] = indicators_json(result.indicators);
    doc["feasibility"] = {{"max_residual_pu", max_res},
                          {"load_flow_iterations", lf_iters},
                          {"load_flow_max_dv_pu", lf_max_dv}};
    doc["wall_ms"] = report.wall_ms;
    write_file((out_dir / "merge_result.json").string(), doc.dump(2) + "\n");
    write_file((out_dir / "state.json").string(), serialize_state(net, result.final_state));
    write_file((out_dir / "indicators.json").string(),
               indicators_json(result.indicators).dump(2) + "\n");
    write_profiles(net, result.final_state, out_dir);
    {
      std::ofstream audit(out_dir / "audit.log");
      for (const auto& rec : result.per_stage)
        audit << rec.label << ": status=" << to_string(rec.status)
              << " outer=" << rec.outer_iterations << " inner=" << rec.inner_iterations
              << " obj_opt=" << rec.objective_at_optimum << " obj_final=" << rec.objective_at_final
              << " bound=" << rec.monotonicity_bound << " viol=" << rec.constraint_violation
              << " freezes=" << rec.freezes.size() << '\n';
      audit << "indicators: total_violations=" << result.indicators.total_violations() << '\n';
    }
    report.result = std::move(doc);
    report.success = true;
  } catch (const StageFailure& e) {
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.error = e.what();
    report.failed_stage = e.stage;
    std::ofstream audit(out_dir / "audit.log");
    for (const auto& rec : e.completed)
      audit << rec.label << ": status=" << to_string(rec.status) << '\n';
    audit << "FAILED at stage " << e.stage << ": " << e.what() << '\n';
  }
  return report;
}

// '*' and '?' wildcards in the filename component.
bool wildcard_match(const std::string& pattern, const std::string& name) {
  size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path pat(pattern);
  const fs::path dir = pat.parent_path().empty() ? fs::path(".") : pat.parent_path();
  const std::string name = pat.filename().string();
  std::vector<fs::path> out;
  if (name.find('*') == std::string::npos && name.find('?') == std::string::npos) {
    if (fs::exists(pat)) out.push_back(pat);
    return out;
  }
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && wildcard_match(name, entry.path().filename().string()))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_merge(const CliConfig& cfg) {
  Network net;
  try {
    net = read_network_file(cfg.input);
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  }
  MergeRunReport report = run_merge_once(cfg, net, cfg.out_dir);
  if (!report.success) {
    std::cerr << "merge failed at stage '" << report.failed_stage << "': " << report.error << '\n';
    return 3;
  }
  std::cout << "merged " << cfg.input << " in " << report.wall_ms << " ms; indicators: "
            << report.result["indicators"]["interco_sn_sn"]["violating"] << "/"
            << report.result["indicators"]["interco_sn_sn"]["population"] << " interco SN_SN, "
            << report.result["indicators"]["loads_act_sn"]["violating"] << "/"
            << report.result["indicators"]["loads_act_sn"]["population"] << " loads ACT SN\n";
  return 0;
}

int cmd_batch(const CliConfig& cfg) {
  const std::vector<fs::path> files = expand_glob(cfg.input);
  if (files.empty()) {
    std::cerr << "usage error: no inputs match '" << cfg.input << "'\n";
    return 1;
  }
  fs::create_directories(cfg.out_dir);
  const int n = static_cast<int>(files.size());
  std::vector<MergeRunReport> reports(n);
  std::vector<std::string> input_errors(n);
  const int jobs = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int i = 0; i < n; ++i) {
    try {
      const Network net = read_network_file(files[i].string());
      const fs::path out_dir = fs::path(cfg.out_dir) / files[i].stem().string();
      CliConfig local = cfg;
      local.input = files[i].string();
      reports[i] = run_merge_once(local, net, out_dir);
    } catch (const Error& e) {
      input_errors[i] = e.what();
    }
  }

  int failures = 0;
  json situations = json::array();
  double total_ms = 0.0, max_ms = 0.0;
  json totals = {{"interco_sn_sn", 0}, {"interco_sn_dacf", 0}, {"v_sn", 0},
                 {"v_dacf", 0},        {"loads_act_sn", 0},    {"loads_rea_sn", 0}};
  for (int i = 0; i < n; ++i) {
    json s;
    s["input"] = files[i].string();
    if (!input_errors[i].empty()) {
      s["success"] = false;
      s["error"] = input_errors[i];
      ++failures;
    } else {
      const MergeRunReport& r = reports[i];
      s["success"] = r.success;
      s["wall_ms"] = r.wall_ms;
      total_ms += r.wall_ms;
      max_ms = std::max(max_ms, r.wall_ms);
      if (r.success) {
        for (auto& [key, value] : totals.items())
          value = value.get<int>() +
                  r.result["indicators"][key]["violating"].get<int>();
      } else {
        s["error"] = r.error;
        s["failed_stage"] = r.failed_stage;
        ++failures;
      }
    }
    situations.push_back(std::move(s));
  }

  json summary;
  summary["config"] = config_json(cfg, make_options(cfg));
  summary["n_situations"] = n;
  summary["n_failures"] = failures;
  summary["success_rate"] = n > 0 ? static_cast<double>(n - failures) / n : 0.0;
  summary["wall_ms_total"] = total_ms;
  summary["wall_ms_max"] = max_ms;
  summary["indicator_totals"] = totals;
  summary["situations"] = situations;
  write_file((fs::path(cfg.out_dir) / "batch_summary.json").string(), summary.dump(2) + "\n");

  std::cout << "batch: " << n - failures << "/" << n << " situations merged, max "
            << max_ms << " ms\n";
  return failures == 0 ? 0 : 3;
}

int cmd_generate(const CliConfig& cfg) {
  ScenarioSpec spec;
  spec.seed = cfg.seed;
  spec.n_areas = cfg.areas;
  spec.buses_per_area = cfg.buses_per_area;
  spec.desync_load_sigma = cfg.desync_sigma;
  spec.dacf_error_sigma = cfg.dacf_sigma;
  spec.target_skew = cfg.target_skew_mw;
  for (double v : parse_csv_numbers(cfg.dacf_areas_csv)) spec.dacf_areas.push_back(static_cast<int>(v));

  try {
    Scenario scenario = generate(spec);
    fs::create_directories(cfg.out_dir);
    write_file((fs::path(cfg.out_dir) / "network.json").string(),
               serialize_network(scenario.network));
    write_file((fs::path(cfg.out_dir) / "ground_truth.json").string(),
               serialize_state(scenario.network, scenario.ground_truth));
    json meta = {{"seed", spec.seed},
                 {"n_areas", spec.n_areas},
                 {"buses_per_area", spec.buses_per_area},
                 {"dacf_areas", spec.dacf_areas},
                 {"desync_load_sigma", spec.desync_load_sigma},
                 {"dacf_error_sigma", spec.dacf_error_sigma},
                 {"target_skew_mw", spec.target_skew},
                 {"note", "sigma values are synthetic-benchmark choices; see README"}};
    if (!cfg.degrade_area_id.empty()) {
      Network degraded =
          degrade_area(scenario.network, scenario.ground_truth, cfg.degrade_area_id, spec);
      write_file((fs::path(cfg.out_dir) / "network_degraded.json").string(),
                 serialize_network(degraded));
      meta["degraded_area"] = cfg.degrade_area_id;
    }
    write_file((fs::path(cfg.out_dir) / "scenario.json").string(), meta.dump(2) + "\n");
  } catch (const GenerationFailure& e) {
    std::cerr << "generation failed: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  }
  std::cout << "generated scenario seed " << cfg.seed << " into " << cfg.out_dir << '\n';
  return 0;
}

int cmd_indicators(const CliConfig& cfg) {
  try {
    const Network net = read_network_file(cfg.input);
    const NetworkState state = read_state_file(net, cfg.state_path);
    const MergeOptions opts = make_options(cfg);
    const IndicatorReport rep = compute_indicators(net, state, opts.thresholds);
    json doc = indicators_json(rep);
    doc["config"] = config_json(cfg, opts);
    fs::create_directories(cfg.out_dir);
    write_file((fs::path(cfg.out_dir) / "indicators.json").string(), doc.dump(2) + "\n");
    write_profiles(net, state, cfg.out_dir);
    std::cout << doc["interco_sn_sn"]["violating"] << "/" << doc["interco_sn_sn"]["population"]
              << " interco SN_SN, " << doc["v_sn"]["violating"] << "/"
              << doc["v_sn"]["population"] << " V SN, " << doc["loads_act_sn"]["violating"] << "/"
              << doc["loads_act_sn"]["population"] << " loads ACT SN\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-area network state merging via prioritized deviation objectives"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto add_common = [&cfg](CLI::App* cmd) {
    cmd->add_option("--tol-flow-mw", cfg.tol_flow_mw, "Flow freeze tolerance [MW]");
    cmd->add_option("--tol-v-kv", cfg.tol_v_kv, "Voltage freeze tolerance [kV]");
    cmd->add_option("--tol-load-mw", cfg.tol_load_mw, "Load freeze tolerance [MW]");
    cmd->add_option("--tol-load-mvar", cfg.tol_load_mvar,
                    "Load freeze tolerance [Mvar] (defaults to --tol-load-mw)");
    cmd->add_option("--huber-delta-mw", cfg.huber_delta_mw, "Huber breakpoint [MW]");
    cmd->add_option("--thresholds", cfg.thresholds_csv,
                    "Indicator thresholds flow_mw,v_kv,p_mw,q_mvar");
    cmd->add_flag("--exclude-dacf-pv", cfg.exclude_dacf_pv,
                  "Drop DACF-area PV buses from the voltage objective");
    cmd->add_option("--out", cfg.out_dir, "Output directory");
  };

  CLI::App* merge_cmd = app.add_subcommand("merge", "Merge one network document");
  merge_cmd->add_option("--input", cfg.input, "Network document")->required();
  merge_cmd->add_option("--mode", cfg.mode, "hierarchical or weighted")
      ->check(CLI::IsMember({"hierarchical", "weighted"}));
  merge_cmd->add_option("--weights", cfg.weights_csv, "Weighted-mode weights w_ic,w_v,w_sn,w_dacf");
  merge_cmd->add_option("--schedule", cfg.schedule_csv,
                        "Stage order, e.g. interco,voltage,sn_load,dacf_load");
  add_common(merge_cmd);

  CLI::App* batch_cmd = app.add_subcommand("batch", "Merge every matching network document");
  batch_cmd->add_option("--input", cfg.input, "Glob over network documents")->required();
  batch_cmd->add_option("--mode", cfg.mode, "hierarchical or weighted")
      ->check(CLI::IsMember({"hierarchical", "weighted"}));
  batch_cmd->add_option("--weights", cfg.weights_csv, "Weighted-mode weights");
  batch_cmd->add_option("--schedule", cfg.schedule_csv, "Stage order");
  batch_cmd->add_option("--jobs", cfg.jobs, "Concurrent merges (default: hardware)");
  add_common(batch_cmd);

  CLI::App* gen_cmd = app.add_subcommand("generate", "Generate a synthetic scenario");
  gen_cmd->add_option("--seed", cfg.seed, "Scenario seed");
  gen_cmd->add_option("--areas", cfg.areas, "Number of areas");
  gen_cmd->add_option("--buses-per-area", cfg.buses_per_area, "Buses per area");
  gen_cmd->add_option("--dacf-areas", cfg.dacf_areas_csv, "DACF area positions, e.g. 2,3");
  gen_cmd->add_option("--desync-sigma", cfg.desync_sigma, "SN load desync sigma (relative)");
  gen_cmd->add_option("--dacf-sigma", cfg.dacf_sigma, "DACF corruption sigma (relative)");
  gen_cmd->add_option("--target-skew-mw", cfg.target_skew_mw, "Interconnection target skew [MW]");
  gen_cmd->add_option("--degrade", cfg.degrade_area_id,
                      "Also emit a copy with this SN area degraded to DACF");
  gen_cmd->add_option("--out", cfg.out_dir, "Output directory");

  CLI::App* ind_cmd = app.add_subcommand("indicators", "Indicator report for a stored state");
  ind_cmd->add_option("--input", cfg.input, "Network document")->required();
  ind_cmd->add_option("--state", cfg.state_path, "State document")->required();
  add_common(ind_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (merge_cmd->parsed()) return cmd_merge(cfg);
    if (batch_cmd->parsed()) return cmd_batch(cfg);
    if (gen_cmd->parsed()) return cmd_generate(cfg);
    if (ind_cmd->parsed()) return cmd_indicators(cfg);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

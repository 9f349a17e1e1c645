// nse: train and evaluate graph neural state estimators on distribution
// grids. Subcommands: gen-data, run-scenario, grid-search, report.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "nse/bench.hpp"
#include "nse/manifest.hpp"

namespace fs = std::filesystem;
using namespace nse;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

// "1-3" (range), "1,2,5" (list) or a single depth.
std::vector<int> parse_layers_spec(const std::string& spec) {
  std::vector<int> out;
  try {
    const auto dash = spec.find('-');
    if (dash != std::string::npos && dash > 0) {
      const int lo = std::stoi(spec.substr(0, dash));
      const int hi = std::stoi(spec.substr(dash + 1));
      if (lo > hi) throw UsageError("--layers range is reversed: " + spec);
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      for (const auto& part : split_list(spec)) out.push_back(std::stoi(part));
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse --layers '" + spec + "' (use e.g. 3, 1-5 or 1,2,4)");
  }
  if (out.empty()) throw UsageError("--layers selects no depths");
  for (int v : out)
    if (v < 1 || v > 10) throw UsageError("--layers values must be in 1..10");
  return out;
}

std::vector<bool> parse_bool_dim(const std::string& value, const std::string& flag) {
  if (value == "both") return {false, true};
  if (value == "true") return {true};
  if (value == "false") return {false};
  throw UsageError(flag + " must be one of: both, true, false");
}

struct CommonTrainArgs {
  int hidden_dim = 4;
  int epochs = 200;
  double lr = 1e-2;
  long seed = 0;
  int jobs = 0;
};

bench::TrainOptions train_options(const CommonTrainArgs& args) {
  bench::TrainOptions opts;
  opts.epochs = args.epochs;
  opts.adam.lr = args.lr;
  return opts;
}

void apply_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

bench::ScenarioData load_scenario_data(const std::string& data_dir, const std::string& other_dir,
                                       long seed) {
  bench::ScenarioData d;
  d.seed = static_cast<uint64_t>(seed);
  d.base_topo = grid::load_grid(data_dir + "/grid.json");
  d.base_series = pf::load_snapshots(data_dir + "/base.jsonl");
  const std::string variants_path = data_dir + "/variants.json";
  if (fs::exists(variants_path)) {
    d.variants = scen::variants_from_json(read_file(variants_path), d.base_topo);
    for (const auto& v : d.variants)
      d.variant_series.push_back(pf::load_snapshots(data_dir + "/" + v.variant_id + ".jsonl"));
  }
  if (!other_dir.empty()) {
    d.other_topo = grid::load_grid(other_dir + "/grid.json");
    d.other_series = pf::load_snapshots(other_dir + "/base.jsonl");
  }
  return d;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string grid;
  std::string out;
  int steps = 96;
  long seed = 0;
};

void cmd_gen_data(const GenDataArgs& args, const std::string& config_file) {
  cli::RunManifest manifest;
  manifest.command = "gen-data";
  manifest.config_file = config_file;
  manifest.seed = args.seed;
  manifest.out_dir = args.out;
  manifest.started_at = cli::iso8601_utc_now();

  const grid::GridTopology topo = grid::load_grid(args.grid);
  fs::create_directories(args.out);

  write_file(args.out + "/grid.json", grid::grid_to_json(topo));
  cli::add_artifact(manifest, "grid.json");

  pf::LoadProfileSpec profile;
  const auto base = pf::generate_time_series(topo, args.steps, profile,
                                             static_cast<uint64_t>(args.seed), "base");
  pf::save_snapshots(args.out + "/base.jsonl", base);
  cli::add_artifact(manifest, "base.jsonl");

  const auto variants = scen::make_topology_variants(topo);
  write_file(args.out + "/variants.json", scen::variants_to_json(variants));
  cli::add_artifact(manifest, "variants.json");
  for (const auto& v : variants) {
    const auto series = pf::generate_time_series(
        v.variant_topology, args.steps, profile,
        mix_seed(static_cast<uint64_t>(args.seed), "variant:" + v.variant_id), v.variant_id,
        static_cast<uint64_t>(args.seed));
    pf::save_snapshots(args.out + "/" + v.variant_id + ".jsonl", series);
    cli::add_artifact(manifest, v.variant_id + ".jsonl");
  }

  manifest.finished_at = cli::iso8601_utc_now();
  cli::write_manifest(manifest);
  std::cout << "wrote " << base.size() << "-snapshot dataset and " << variants.size()
            << " variant dataset(s) to " << args.out << "\n";
}

// ---- run-scenario ----

struct RunScenarioArgs {
  std::string scenario;
  std::string data_dir;
  std::string other_dir;
  std::string out;
  std::string model = "gcn";
  std::string layers = "2";
  bool fp = false;
  bool adm = false;
  CommonTrainArgs train;
};

void cmd_run_scenario(const RunScenarioArgs& args, const std::string& config_file) {
  apply_jobs(args.train.jobs);
  const bench::ScenarioKind kind = bench::scenario_from_name(args.scenario);
  const auto layer_list = parse_layers_spec(args.layers);
  if (layer_list.size() != 1) throw UsageError("run-scenario takes a single --layers depth");

  cli::RunManifest manifest;
  manifest.command = "run-scenario";
  manifest.config_file = config_file;
  manifest.seed = args.train.seed;
  manifest.out_dir = args.out;
  manifest.started_at = cli::iso8601_utc_now();

  const bench::ScenarioData data =
      load_scenario_data(args.data_dir, args.other_dir, args.train.seed);
  gnn::ModelConfig config;
  config.kind = gnn::layer_kind_from_name(args.model);
  config.layers = layer_list[0];
  config.hidden_dim = args.train.hidden_dim;
  config.use_fp = args.fp;
  config.use_adm = args.adm;

  bench::ScenarioExtras extras;
  const bench::BenchmarkResult result = bench::run_scenario(
      kind, data, config, args.train.seed, train_options(args.train), &extras);

  fs::create_directories(args.out);
  bench::ResultsTable table;
  table.add(result);
  bench::save_results(args.out + "/results.csv", table);
  cli::add_artifact(manifest, "results.csv");

  if (!extras.od_curve.empty()) {
    std::string curve = "level,mse\n";
    for (const auto& [level, mse] : extras.od_curve)
      curve += format_g6(level) + "," + format_g6(mse) + "\n";
    write_file(args.out + "/od_curve.csv", curve);
    cli::add_artifact(manifest, "od_curve.csv");
  }

  manifest.finished_at = cli::iso8601_utc_now();
  cli::write_manifest(manifest);
  std::cout << bench::scenario_name(kind) << " " << result.model << " layers=" << result.layers
            << " fp=" << (result.fp ? "True" : "False")
            << " adm=" << (result.adm ? "True" : "False") << " mse=" << format_g6(result.mse)
            << " n_params=" << result.n_params << "\n";
}

// ---- grid-search ----

struct GridSearchArgs {
  std::string scenarios = "od,tc1,tc2";
  std::string data_dir;
  std::string other_dir;
  std::string out;
  std::string models = "gcn,gat,gin,graphsage";
  std::string layers = "1-10";
  std::string fp = "both";
  std::string adm = "both";
  CommonTrainArgs train;
};

void cmd_grid_search(const GridSearchArgs& args, const std::string& config_file) {
  apply_jobs(args.train.jobs);
  std::vector<bench::ScenarioKind> kinds;
  for (const auto& name : split_list(args.scenarios))
    kinds.push_back(bench::scenario_from_name(name));
  if (kinds.empty()) throw UsageError("--scenarios selects nothing");

  bench::GridSpace space;
  space.models.clear();
  for (const auto& name : split_list(args.models))
    space.models.push_back(gnn::layer_kind_from_name(name));
  if (space.models.empty()) throw UsageError("--models selects nothing");
  space.layers = parse_layers_spec(args.layers);
  space.fps = parse_bool_dim(args.fp, "--fp");
  space.adms = parse_bool_dim(args.adm, "--adm");
  space.hidden_dim = args.train.hidden_dim;

  cli::RunManifest manifest;
  manifest.command = "grid-search";
  manifest.config_file = config_file;
  manifest.seed = args.train.seed;
  manifest.out_dir = args.out;
  manifest.started_at = cli::iso8601_utc_now();

  const bench::ScenarioData data =
      load_scenario_data(args.data_dir, args.other_dir, args.train.seed);

  std::vector<std::string> errors;
  const bench::ResultsTable table = bench::grid_search(
      kinds, space, data, {args.train.seed}, train_options(args.train), &errors);

  fs::create_directories(args.out);
  bench::save_results(args.out + "/results.csv", table);
  cli::add_artifact(manifest, "results.csv");
  if (!errors.empty()) {
    std::string log;
    for (const auto& e : errors) log += e + "\n";
    write_file(args.out + "/errors.log", log);
    cli::add_artifact(manifest, "errors.log");
    std::cerr << errors.size() << " configuration(s) failed; see errors.log\n";
  }

  manifest.finished_at = cli::iso8601_utc_now();
  cli::write_manifest(manifest);
  std::cout << "wrote " << table.rows.size() << " result row(s) to " << args.out
            << "/results.csv\n";
}

// ---- report ----

struct ReportArgs {
  std::string results;
  std::string out;
};

void cmd_report(const ReportArgs& args, const std::string& config_file) {
  cli::RunManifest manifest;
  manifest.command = "report";
  manifest.config_file = config_file;
  manifest.out_dir = args.out;
  manifest.started_at = cli::iso8601_utc_now();

  const bench::ResultsTable table = bench::load_results(args.results);
  if (table.rows.empty()) throw ValidationError("results file has no rows");
  fs::create_directories(args.out);

  // Augmentation summary over the table truncated to 7 layers.
  const bench::ResultsTable truncated = bench::truncate_results(table, 7);
  std::string aug = "scenario,fp,adm,mean_mse,rows\n";
  for (const auto& s : bench::aggregate_augmentations(truncated)) {
    aug += bench::scenario_name(s.scenario);
    aug += std::string(",") + (s.fp ? "True" : "False") + "," + (s.adm ? "True" : "False") + "," +
           format_g6(s.mean_mse) + "," + std::to_string(s.rows) + "\n";
  }
  write_file(args.out + "/augmentation_summary.csv", aug);
  cli::add_artifact(manifest, "augmentation_summary.csv");

  // Pearson correlations; absent (zero-variance) coefficients print empty.
  const bench::CorrelationMatrix cm = bench::correlation_matrix(table);
  std::string corr;
  for (const auto& label : cm.labels) corr += "," + label;
  corr += "\n";
  for (size_t i = 0; i < cm.labels.size(); ++i) {
    corr += cm.labels[i];
    for (size_t j = 0; j < cm.labels.size(); ++j) {
      corr += ",";
      if (cm.r[i][j]) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", *cm.r[i][j]);
        corr += buf;
      }
    }
    corr += "\n";
  }
  write_file(args.out + "/correlation_matrix.csv", corr);
  cli::add_artifact(manifest, "correlation_matrix.csv");

  // Parameter-count series, raw and averaged per depth.
  bench::ResultsTable sorted = table;
  std::sort(sorted.rows.begin(), sorted.rows.end(),
            [](const bench::BenchmarkResult& a, const bench::BenchmarkResult& b) {
              return std::make_tuple(static_cast<int>(a.scenario), a.n_params, a.model, a.layers,
                                     a.fp, a.adm, a.seed) <
                     std::make_tuple(static_cast<int>(b.scenario), b.n_params, b.model, b.layers,
                                     b.fp, b.adm, b.seed);
            });
  std::string series = "scenario,n_params,model,layers,fp,adm,mse\n";
  for (const auto& r : sorted.rows) {
    series += bench::scenario_name(r.scenario) + "," + std::to_string(r.n_params) + "," + r.model +
              "," + std::to_string(r.layers) + "," + (r.fp ? "True" : "False") + "," +
              (r.adm ? "True" : "False") + "," + format_g6(r.mse) + "\n";
  }
  write_file(args.out + "/params_vs_mse.csv", series);
  cli::add_artifact(manifest, "params_vs_mse.csv");

  std::map<std::pair<int, int>, std::pair<double, std::pair<double, int>>> depth;  // sum,(params,count)
  for (const auto& r : table.rows) {
    auto& slot = depth[{static_cast<int>(r.scenario), r.layers}];
    slot.first += r.mse;
    slot.second.first += static_cast<double>(r.n_params);
    slot.second.second += 1;
  }
  std::string means = "scenario,layers,mean_mse,mean_n_params\n";
  for (const auto& [key, agg] : depth) {
    means += bench::scenario_name(static_cast<bench::ScenarioKind>(key.first)) + "," +
             std::to_string(key.second) + "," + format_g6(agg.first / agg.second.second) + "," +
             format_g6(agg.second.first / agg.second.second) + "\n";
  }
  write_file(args.out + "/depth_means.csv", means);
  cli::add_artifact(manifest, "depth_means.csv");

  manifest.finished_at = cli::iso8601_utc_now();
  cli::write_manifest(manifest);
  std::cout << "wrote report tables to " << args.out << "\n";
}

void add_train_flags(CLI::App* sub, CommonTrainArgs& train) {
  sub->add_option("--hidden-dim", train.hidden_dim, "Hidden width of every layer")
      ->check(CLI::PositiveNumber);
  sub->add_option("--epochs", train.epochs, "Training epochs (full batch)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lr", train.lr, "Adam learning rate");
  sub->add_option("--seed", train.seed, "Experiment seed");
  sub->add_option("--jobs", train.jobs, "Max concurrent configurations (0 = default)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural state estimation benchmarks for power distribution grids"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML config file");
  app.get_config_ptr()->configurable(false);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Simulate load series and variant datasets");
  gen_cmd->add_option("--grid", gen.grid, "Grid description file")->required();
  gen_cmd->add_option("--steps", gen.steps, "Snapshots to simulate")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Simulation seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  RunScenarioArgs run;
  CLI::App* run_cmd = app.add_subcommand("run-scenario", "Train and score one configuration");
  run_cmd->add_option("--scenarios,--scenario", run.scenario, "Scenario (od, tc1, tc2, pq2mv, mv2pq)")
      ->required();
  run_cmd->add_option("--data", run.data_dir, "Dataset directory from gen-data")->required();
  run_cmd->add_option("--other-data", run.other_dir, "Second grid's dataset directory");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--models,--model", run.model, "Layer kind");
  run_cmd->add_option("--layers", run.layers, "Stack depth");
  run_cmd->add_flag("--fp", run.fp, "Use feature propagation");
  run_cmd->add_flag("--adm", run.adm, "Use admittance edge weights");
  add_train_flags(run_cmd, run.train);

  GridSearchArgs search;
  CLI::App* search_cmd = app.add_subcommand("grid-search", "Sweep the configuration space");
  search_cmd->add_option("--scenarios", search.scenarios, "Comma-separated scenario list");
  search_cmd->add_option("--data", search.data_dir, "Dataset directory from gen-data")->required();
  search_cmd->add_option("--other-data", search.other_dir, "Second grid's dataset directory");
  search_cmd->add_option("--out", search.out, "Output directory")->required();
  search_cmd->add_option("--models", search.models, "Comma-separated layer kinds");
  search_cmd->add_option("--layers", search.layers, "Depths: N, A-B or comma list");
  search_cmd->add_option("--fp", search.fp, "Feature propagation: both, true or false");
  search_cmd->add_option("--adm", search.adm, "Admittance weights: both, true or false");
  add_train_flags(search_cmd, search.train);

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "Summarize a results.csv");
  report_cmd->add_option("results", report.results, "results.csv to analyze")->required();
  report_cmd->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const CLI::Option* config_opt = app.get_config_ptr();
    const std::string config_file =
        config_opt->count() > 0 ? config_opt->as<std::string>() : std::string{};
    if (gen_cmd->parsed()) cmd_gen_data(gen, config_file);
    if (run_cmd->parsed()) cmd_run_scenario(run, config_file);
    if (search_cmd->parsed()) cmd_grid_search(search, config_file);
    if (report_cmd->parsed()) cmd_report(report, config_file);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

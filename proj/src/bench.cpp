#include "nse/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace nse::bench {

using gnn::GnnModel;
using gnn::LayerGraph;
using gnn::ModelConfig;
using grid::ElectricalGraph;
using scen::ObservabilityMask;

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::OD: return "od";
    case ScenarioKind::TC1: return "tc1";
    case ScenarioKind::TC2: return "tc2";
    case ScenarioKind::PQ2MV: return "pq2mv";
    case ScenarioKind::MV2PQ: return "mv2pq";
  }
  throw ValidationError("unknown scenario kind");
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "od") return ScenarioKind::OD;
  if (name == "tc1") return ScenarioKind::TC1;
  if (name == "tc2") return ScenarioKind::TC2;
  if (name == "pq2mv") return ScenarioKind::PQ2MV;
  if (name == "mv2pq") return ScenarioKind::MV2PQ;
  throw UsageError("unknown scenario '" + name + "' (valid: od, tc1, tc2, pq2mv, mv2pq)");
}

namespace {

auto row_key(const BenchmarkResult& r) {
  return std::make_tuple(static_cast<int>(r.scenario), r.model, r.layers, r.fp, r.adm, r.seed);
}

}  // namespace

void ResultsTable::add(BenchmarkResult row) {
  if (!std::isfinite(row.mse) || row.mse < 0.0)
    throw ValidationError("result mse must be finite and non-negative");
  for (const auto& existing : rows)
    if (row_key(existing) == row_key(row))
      throw ValidationError("duplicate result key: " + scenario_name(row.scenario) + "," +
                            row.model + "," + std::to_string(row.layers));
  rows.push_back(std::move(row));
}

void ResultsTable::sort() {
  std::sort(rows.begin(), rows.end(),
            [](const BenchmarkResult& a, const BenchmarkResult& b) { return row_key(a) < row_key(b); });
}

static const char* kCsvHeader = "scenario,model,layers,fp,adm,mse,n_params,seed";

std::string results_to_csv(const ResultsTable& table) {
  std::string out(kCsvHeader);
  out += '\n';
  char mse[64];
  for (const auto& r : table.rows) {
    std::snprintf(mse, sizeof(mse), "%.6g", r.mse);
    out += scenario_name(r.scenario);
    out += ',';
    out += r.model;
    out += ',';
    out += std::to_string(r.layers);
    out += ',';
    out += r.fp ? "True" : "False";
    out += ',';
    out += r.adm ? "True" : "False";
    out += ',';
    out += mse;
    out += ',';
    out += std::to_string(r.n_params);
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_bool(const std::string& s) {
  if (s == "True") return true;
  if (s == "False") return false;
  throw ParseError("results.csv: boolean must be True or False, got '" + s + "'");
}

}  // namespace

ResultsTable results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ParseError(std::string("results.csv: expected header '") + kCsvHeader + "'");
  ResultsTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 8)
      throw ParseError("results.csv line " + std::to_string(lineno) + ": expected 8 fields");
    BenchmarkResult r;
    try {
      r.scenario = scenario_from_name(fields[0]);
    } catch (const UsageError& e) {
      throw ParseError("results.csv line " + std::to_string(lineno) + ": " + e.what());
    }
    r.model = fields[1];
    try {
      r.layers = std::stoi(fields[2]);
      r.fp = parse_bool(fields[3]);
      r.adm = parse_bool(fields[4]);
      r.mse = std::stod(fields[5]);
      r.n_params = std::stol(fields[6]);
      r.seed = std::stol(fields[7]);
    } catch (const std::logic_error&) {
      throw ParseError("results.csv line " + std::to_string(lineno) + ": malformed number");
    }
    table.add(std::move(r));
  }
  return table;
}

void save_results(const std::string& path, const ResultsTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << results_to_csv(table);
}

ResultsTable load_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return results_from_csv(ss.str());
}

namespace {

// First bus id of every fused node, for reading per-bus voltages node-wise.
std::vector<int> node_rep_bus(const ElectricalGraph& graph) {
  std::vector<int> rep(graph.node_count, -1);
  for (const auto& [bus, node] : graph.bus_to_node)
    if (rep[node] < 0) rep[node] = bus;
  for (int i = 0; i < graph.node_count; ++i)
    if (rep[i] < 0) throw ValidationError("graph node without any mapped bus");
  return rep;
}

}  // namespace

Mat node_targets(const ElectricalGraph& graph, const pf::Snapshot& snap) {
  const auto rep = node_rep_bus(graph);
  Mat y(graph.node_count, 2);
  for (int i = 0; i < graph.node_count; ++i) {
    auto it = snap.voltages.v.find(rep[i]);
    if (it == snap.voltages.v.end())
      throw ValidationError("snapshot lacks a voltage for bus " + std::to_string(rep[i]));
    y(i, 0) = it->second.v_pu * std::cos(it->second.theta_rad);
    y(i, 1) = it->second.v_pu * std::sin(it->second.theta_rad);
  }
  return y;
}

Mat node_features(const ElectricalGraph& graph, const pf::Snapshot& snap,
                  const ObservabilityMask& mask, bool use_fp,
                  const fp::PropagationConfig& prop) {
  if (static_cast<int>(mask.observed.size()) != graph.node_count)
    throw ValidationError("mask length != graph node count");
  const Mat truth = node_targets(graph, snap);
  Mat x(graph.node_count, 3);
  if (use_fp) {
    Mat known(graph.node_count, 2);
    for (int i = 0; i < graph.node_count; ++i)
      if (mask.observed[i]) {
        known(i, 0) = truth(i, 0);
        known(i, 1) = truth(i, 1);
      }
    const Mat filled = fp::propagate_features(graph, known, mask, prop);
    for (int i = 0; i < graph.node_count; ++i) {
      x(i, 0) = filled(i, 0);
      x(i, 1) = filled(i, 1);
      x(i, 2) = mask.observed[i] ? 1.0 : 0.0;
    }
  } else {
    for (int i = 0; i < graph.node_count; ++i)
      if (mask.observed[i]) {
        x(i, 0) = truth(i, 0);
        x(i, 1) = truth(i, 1);
        x(i, 2) = 1.0;
      }
  }
  return x;
}

namespace {

struct Stacked {
  Mat x;  // (nodes * snaps) x 3
  Mat y;  // (nodes * snaps) x 2
};

Stacked stack_dataset(const ElectricalGraph& graph, const std::vector<pf::Snapshot>& snaps,
                      const ObservabilityMask& mask, bool use_fp,
                      const fp::PropagationConfig& prop) {
  const int n = graph.node_count;
  Stacked s;
  s.x = Mat(n * static_cast<int>(snaps.size()), 3);
  s.y = Mat(n * static_cast<int>(snaps.size()), 2);
  for (size_t k = 0; k < snaps.size(); ++k) {
    const Mat xk = node_features(graph, snaps[k], mask, use_fp, prop);
    const Mat yk = node_targets(graph, snaps[k]);
    std::copy(xk.data.begin(), xk.data.end(), s.x.data.begin() + k * xk.size());
    std::copy(yk.data.begin(), yk.data.end(), s.y.data.begin() + k * yk.size());
  }
  return s;
}

}  // namespace

GnnModel train_model(const ModelConfig& config, const std::vector<TrainSet>& sets,
                     const TrainOptions& opts) {
  if (sets.empty()) throw ValidationError("train_model needs at least one dataset");
  for (const auto& set : sets) {
    if (!set.graph || !set.snaps) throw ValidationError("train set missing graph or snapshots");
    if (set.snaps->empty()) throw ValidationError("train dataset is empty");
  }
  if (opts.epochs < 1) throw ValidationError("epochs must be >= 1");

  GnnModel model = gnn::build_model(config);

  struct Prepared {
    const TrainSet* set = nullptr;
    LayerGraph lg;
    Mat y;  // stacked targets, (nodes * snaps) x 2
    double weight = 0.0;
  };
  std::vector<Prepared> prep;
  double total_entries = 0.0;
  for (const auto& set : sets) {
    Prepared p;
    p.set = &set;
    const int n_snaps = static_cast<int>(set.snaps->size());
    p.lg = gnn::build_layer_graph(gnn::disjoint_union(*set.graph, n_snaps), config.use_adm);
    p.y = Mat(set.graph->node_count * n_snaps, 2);
    for (int k = 0; k < n_snaps; ++k) {
      const Mat yk = node_targets(*set.graph, (*set.snaps)[k]);
      std::copy(yk.data.begin(), yk.data.end(), p.y.data.begin() + k * yk.size());
    }
    p.weight = static_cast<double>(p.y.size());
    total_entries += p.weight;
    prep.push_back(std::move(p));
  }
  for (auto& p : prep) p.weight /= total_entries;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::vector<Mat> acc(model.params.size());
    for (size_t i = 0; i < acc.size(); ++i)
      acc[i] = Mat(model.params[i].value.rows, model.params[i].value.cols);
    double loss_total = 0.0;
    for (size_t si = 0; si < prep.size(); ++si) {
      const Prepared& p = prep[si];
      const TrainSet& set = *p.set;
      // A fresh sensor subset per snapshot and epoch: the model learns the
      // observability level rather than one particular sensor placement, so
      // it can be scored on measurement sets it never trained with.
      const int n = set.graph->node_count;
      Mat x(p.y.rows, 3);
      for (size_t k = 0; k < set.snaps->size(); ++k) {
        const ObservabilityMask mk = scen::sample_observability_mask(
            n, opts.observability,
            mix_seed(config.seed, "mask-aug",
                     {epoch, static_cast<int64_t>(si), static_cast<int64_t>(k)}),
            set.graph->slack_node);
        const Mat xk = node_features(*set.graph, (*set.snaps)[k], mk, config.use_fp, opts.prop);
        std::copy(xk.data.begin(), xk.data.end(), x.data.begin() + k * xk.size());
      }
      nn::Tape tape;
      const int xid = tape.leaf(std::move(x));
      std::vector<int> ids;
      const int out = model.forward(tape, p.lg, xid, &ids);
      const int target = tape.leaf(p.y);
      const int loss = tape.mse_loss(out, target);
      loss_total += p.weight * tape.val(loss).data[0];
      tape.backward(tape.scale(loss, p.weight));
      for (size_t i = 0; i < ids.size(); ++i) {
        const Mat& g = tape.grad(ids[i]);
        if (g.data.empty()) continue;
        for (size_t j = 0; j < acc[i].size(); ++j) acc[i].data[j] += g.data[j];
      }
    }
    if (!std::isfinite(loss_total))
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    for (size_t i = 0; i < model.params.size(); ++i)
      nn::adam_step(model.params[i].value, acc[i], model.params[i].opt, opts.adam);
  }
  return model;
}

void accumulate_mse(const GnnModel& model, const ElectricalGraph& graph,
                    const std::vector<pf::Snapshot>& snaps, const ObservabilityMask& mask,
                    const TrainOptions& opts, SseAccum& acc) {
  if (snaps.empty()) return;
  const ElectricalGraph batched = gnn::disjoint_union(graph, static_cast<int>(snaps.size()));
  const LayerGraph lg = gnn::build_layer_graph(batched, model.config.use_adm);
  const Stacked data = stack_dataset(graph, snaps, mask, model.config.use_fp, opts.prop);
  const Mat pred = gnn::predict(model, lg, data.x);
  for (size_t i = 0; i < data.y.size(); ++i) {
    const double d = pred.data[i] - data.y.data[i];
    acc.sse += d * d;
  }
  acc.entries += static_cast<long>(data.y.size());
}

double evaluate_mse(const GnnModel& model, const ElectricalGraph& graph,
                    const std::vector<pf::Snapshot>& snaps, const ObservabilityMask& mask,
                    const TrainOptions& opts) {
  SseAccum acc;
  accumulate_mse(model, graph, snaps, mask, opts, acc);
  return acc.mse();
}

double evaluate_mse(const std::function<Mat(const Mat&)>& predictor, const ElectricalGraph& graph,
                    const std::vector<pf::Snapshot>& snaps, const ObservabilityMask& mask,
                    const TrainOptions& opts) {
  SseAccum acc;
  for (const auto& snap : snaps) {
    const Mat x = node_features(graph, snap, mask, /*use_fp=*/false, opts.prop);
    const Mat y = node_targets(graph, snap);
    const Mat pred = predictor(x);
    if (!pred.same_shape(y)) throw ValidationError("predictor output must be node_count x 2");
    for (size_t i = 0; i < y.size(); ++i) {
      const double d = pred.data[i] - y.data[i];
      acc.sse += d * d;
    }
    acc.entries += static_cast<long>(y.size());
  }
  return acc.mse();
}

namespace {

int model_index(gnn::LayerKind kind) { return static_cast<int>(kind); }

// Sensors are installed at buses and stay put when switching changes the
// topology, so one grid has one measurement set shared by all its variants; a
// fused node counts as observed when any of its buses carries a sensor.
// grid_tag separates the two grids of a transfer scenario.
ObservabilityMask dataset_mask(const ScenarioData& data, const grid::GridTopology& topo,
                               const ElectricalGraph& graph, const std::string& grid_tag,
                               double fraction) {
  std::vector<int> bus_ids;
  bus_ids.reserve(topo.buses.size());
  for (const auto& b : topo.buses) bus_ids.push_back(b.id);
  std::sort(bus_ids.begin(), bus_ids.end());
  int slack_pos = -1;
  const int slack_id = topo.slack_bus_id();
  for (size_t i = 0; i < bus_ids.size(); ++i)
    if (bus_ids[i] == slack_id) slack_pos = static_cast<int>(i);

  const ObservabilityMask sensors = scen::sample_observability_mask(
      static_cast<int>(bus_ids.size()), fraction, mix_seed(data.seed, "sensors:" + grid_tag),
      slack_pos);

  ObservabilityMask mask;
  mask.fraction = fraction;
  mask.slack_node = graph.slack_node;
  mask.observed.assign(graph.node_count, false);
  for (size_t i = 0; i < bus_ids.size(); ++i) {
    if (!sensors.observed[i]) continue;
    auto it = graph.bus_to_node.find(bus_ids[i]);
    if (it == graph.bus_to_node.end())
      throw ValidationError("sensor bus " + std::to_string(bus_ids[i]) + " missing from graph");
    mask.observed[it->second] = true;
  }
  return mask;
}

std::vector<pf::Snapshot> first_half(const std::vector<pf::Snapshot>& snaps) {
  return {snaps.begin(), snaps.begin() + snaps.size() / 2};
}

std::vector<pf::Snapshot> second_half(const std::vector<pf::Snapshot>& snaps) {
  return {snaps.begin() + snaps.size() / 2, snaps.end()};
}

// Derive the initialization stream for one grid-search cell so that every
// (configuration, seed) pair trains from its own reproducible start.
ModelConfig seeded_config(const ModelConfig& config, long seed) {
  ModelConfig out = config;
  out.seed = mix_seed(static_cast<uint64_t>(seed), "init",
                      {model_index(config.kind), config.layers, config.use_fp ? 1 : 0,
                       config.use_adm ? 1 : 0});
  return out;
}

struct VariantSplit {
  std::vector<int> train;  // indices into data.variants
  std::vector<int> test;
};

VariantSplit split_variant_indices(const ScenarioData& data) {
  if (data.variants.size() != data.variant_series.size())
    throw ValidationError("variant series not aligned with variants");
  auto [train_v, test_v] =
      scen::split_variants(data.variants, 0.5, mix_seed(data.seed, "variant-split"));
  auto index_of = [&](const scen::TopologyVariant& v) {
    for (size_t i = 0; i < data.variants.size(); ++i)
      if (data.variants[i].variant_id == v.variant_id) return static_cast<int>(i);
    throw ValidationError("variant id not found: " + v.variant_id);
  };
  VariantSplit split;
  for (const auto& v : train_v) split.train.push_back(index_of(v));
  for (const auto& v : test_v) split.test.push_back(index_of(v));
  return split;
}

GnnModel train_baseline_model(const ScenarioData& data, const ElectricalGraph& base_graph,
                              const ObservabilityMask& base_mask, const ModelConfig& config,
                              const TrainOptions& opts) {
  const std::vector<pf::Snapshot> train_snaps = first_half(data.base_series);
  return train_model(config, {{&base_graph, &train_snaps, base_mask}}, opts);
}

}  // namespace

BenchmarkResult run_scenario(ScenarioKind kind, const ScenarioData& data,
                             const ModelConfig& config0, long seed, const TrainOptions& opts,
                             ScenarioExtras* extras) {
  if (data.base_series.size() < 2) throw ValidationError("base series needs at least 2 snapshots");
  const ModelConfig config = seeded_config(config0, seed);
  const ElectricalGraph base_graph = grid::build_electrical_graph(data.base_topo, true);
  const ObservabilityMask base_mask =
      dataset_mask(data, data.base_topo, base_graph, "base", opts.observability);

  BenchmarkResult result;
  result.scenario = kind;
  result.model = gnn::layer_kind_name(config.kind);
  result.layers = config.layers;
  result.fp = config.use_fp;
  result.adm = config.use_adm;
  result.seed = seed;

  switch (kind) {
    case ScenarioKind::OD: {
      const GnnModel model = train_baseline_model(data, base_graph, base_mask, config, opts);
      result.n_params = gnn::count_parameters(model);
      const std::vector<pf::Snapshot> eval_snaps = second_half(data.base_series);
      const int n_levels = 6;   // baseline down to zero in equal steps
      const int n_chains = 4;   // independent nested sensor-removal chains per level
      std::vector<double> level_of(n_levels), mse_of(n_levels, 0.0);
      for (int chain = 0; chain < n_chains; ++chain) {
        ObservabilityMask mask = base_mask;
        for (int k = 0; k < n_levels; ++k) {
          const double level = opts.observability * (n_levels - 1 - k) / (n_levels - 1);
          level_of[k] = level;
          if (level < mask.fraction)
            mask =
                scen::degrade_observability(mask, level, mix_seed(data.seed, "degrade", {chain, k}));
          // The undegraded first level and the empty last level are identical
          // across chains; score them once.
          const bool shared = k == 0 || k == n_levels - 1;
          if (shared && chain > 0) continue;
          const double mse = evaluate_mse(model, base_graph, eval_snaps, mask, opts);
          mse_of[k] += shared ? mse * n_chains : mse;
        }
      }
      double total = 0.0;
      for (int k = 0; k < n_levels; ++k) {
        mse_of[k] /= n_chains;
        if (extras) extras->od_curve.push_back({level_of[k], mse_of[k]});
        total += mse_of[k];
      }
      result.mse = total / n_levels;
      break;
    }
    case ScenarioKind::TC1:
    case ScenarioKind::TC2: {
      if (data.variants.empty())
        throw ValidationError("scenario " + scenario_name(kind) +
                              " needs topology-variant datasets");
      const VariantSplit split = split_variant_indices(data);

      std::deque<ElectricalGraph> graphs;  // stable addresses for TrainSet pointers
      GnnModel model = [&] {
        if (kind == ScenarioKind::TC1)
          return train_baseline_model(data, base_graph, base_mask, config, opts);
        std::vector<TrainSet> sets;
        for (int idx : split.train) {
          graphs.push_back(
              grid::build_electrical_graph(data.variants[idx].variant_topology, true));
          sets.push_back({&graphs.back(), &data.variant_series[idx],
                          dataset_mask(data, data.variants[idx].variant_topology, graphs.back(),
                                       "base", opts.observability)});
        }
        return train_model(config, sets, opts);
      }();
      result.n_params = gnn::count_parameters(model);

      SseAccum acc;
      for (int idx : split.test) {
        const ElectricalGraph g =
            grid::build_electrical_graph(data.variants[idx].variant_topology, true);
        const ObservabilityMask mask = dataset_mask(data, data.variants[idx].variant_topology, g,
                                                    "base", opts.observability);
        accumulate_mse(model, g, data.variant_series[idx], mask, opts, acc);
      }
      result.mse = acc.mse();
      break;
    }
    case ScenarioKind::PQ2MV:
    case ScenarioKind::MV2PQ: {
      if (!data.other_topo || data.other_series.empty())
        throw ValidationError("scenario " + scenario_name(kind) + " needs the second grid dataset");
      const ElectricalGraph other_graph = grid::build_electrical_graph(*data.other_topo, true);
      const ObservabilityMask other_mask =
          dataset_mask(data, *data.other_topo, other_graph, "other", opts.observability);

      const bool from_base = kind == ScenarioKind::PQ2MV;
      const std::vector<pf::Snapshot> train_snaps =
          first_half(from_base ? data.base_series : data.other_series);
      const GnnModel model =
          train_model(config, {{from_base ? &base_graph : &other_graph, &train_snaps,
                                from_base ? base_mask : other_mask}},
                      opts);
      result.n_params = gnn::count_parameters(model);
      result.mse = from_base ? evaluate_mse(model, other_graph, data.other_series, other_mask, opts)
                             : evaluate_mse(model, base_graph, data.base_series, base_mask, opts);
      break;
    }
  }
  return result;
}

ResultsTable grid_search(const std::vector<ScenarioKind>& scenarios, const GridSpace& space,
                         const ScenarioData& data, const std::vector<long>& seeds,
                         const TrainOptions& opts, std::vector<std::string>* errors) {
  if (space.models.empty() || space.layers.empty() || space.fps.empty() || space.adms.empty())
    throw ValidationError("grid space must be non-empty in every dimension");
  if (scenarios.empty()) throw ValidationError("no scenarios requested");
  if (seeds.empty()) throw ValidationError("no seeds given");

  struct Item {
    ScenarioKind scenario;
    ModelConfig config;
    long seed;
  };
  std::vector<Item> items;
  for (ScenarioKind sc : scenarios)
    for (gnn::LayerKind kind : space.models)
      for (int layers : space.layers)
        for (bool fpv : space.fps)
          for (bool adm : space.adms)
            for (long seed : seeds) {
              ModelConfig c;
              c.kind = kind;
              c.layers = layers;
              c.hidden_dim = space.hidden_dim;
              c.use_fp = fpv;
              c.use_adm = adm;
              items.push_back({sc, c, seed});
            }

  std::vector<BenchmarkResult> slots(items.size());
  std::vector<char> ok(items.size(), 0);
  std::vector<std::string> errs(items.size());

#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < items.size(); ++i) {
    try {
      slots[i] = run_scenario(items[i].scenario, data, items[i].config, items[i].seed, opts);
      ok[i] = 1;
    } catch (const std::exception& e) {
      errs[i] = scenario_name(items[i].scenario) + "," +
                gnn::layer_kind_name(items[i].config.kind) + "," +
                std::to_string(items[i].config.layers) + "," +
                (items[i].config.use_fp ? "True" : "False") + "," +
                (items[i].config.use_adm ? "True" : "False") + ": " + e.what();
    }
  }

  ResultsTable table;
  for (size_t i = 0; i < items.size(); ++i) {
    if (ok[i])
      table.add(std::move(slots[i]));
    else if (errors)
      errors->push_back(errs[i]);
  }
  table.sort();
  return table;
}

double baseline_mse(const ScenarioData& data, const GridSpace& space,
                    const std::vector<long>& seeds, const TrainOptions& opts) {
  if (data.base_series.size() < 2) throw ValidationError("base series needs at least 2 snapshots");
  const ElectricalGraph base_graph = grid::build_electrical_graph(data.base_topo, true);
  const ObservabilityMask base_mask =
      dataset_mask(data, data.base_topo, base_graph, "base", opts.observability);
  const std::vector<pf::Snapshot> eval_snaps = second_half(data.base_series);

  struct Item {
    ModelConfig config;
    long seed;
  };
  std::vector<Item> items;
  for (gnn::LayerKind kind : space.models)
    for (int layers : space.layers)
      for (bool fpv : space.fps)
        for (bool adm : space.adms)
          for (long seed : seeds) {
            ModelConfig c;
            c.kind = kind;
            c.layers = layers;
            c.hidden_dim = space.hidden_dim;
            c.use_fp = fpv;
            c.use_adm = adm;
            items.push_back({c, seed});
          }

  std::vector<double> mses(items.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < items.size(); ++i) {
    const ModelConfig config = seeded_config(items[i].config, items[i].seed);
    const GnnModel model = train_baseline_model(data, base_graph, base_mask, config, opts);
    mses[i] = evaluate_mse(model, base_graph, eval_snaps, base_mask, opts);
  }
  return *std::min_element(mses.begin(), mses.end());
}

ResultsTable truncate_results(const ResultsTable& table, int max_layers) {
  ResultsTable out;
  for (const auto& r : table.rows)
    if (r.layers <= max_layers) out.rows.push_back(r);
  return out;
}

std::vector<AugmentationSummary> aggregate_augmentations(const ResultsTable& table) {
  std::map<std::tuple<int, bool, bool>, std::pair<double, int>> groups;
  for (const auto& r : table.rows) {
    auto& [sum, count] = groups[{static_cast<int>(r.scenario), r.fp, r.adm}];
    sum += r.mse;
    count += 1;
  }
  std::vector<AugmentationSummary> out;
  for (const auto& [key, agg] : groups) {
    AugmentationSummary s;
    s.scenario = static_cast<ScenarioKind>(std::get<0>(key));
    s.fp = std::get<1>(key);
    s.adm = std::get<2>(key);
    s.mean_mse = agg.first / agg.second;
    s.rows = agg.second;
    out.push_back(s);
  }
  return out;
}

CorrelationMatrix correlation_matrix(const ResultsTable& table) {
  // Pivot to one row per configuration with an mse column per scenario.
  std::vector<ScenarioKind> scenarios;
  for (const auto& r : table.rows)
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
      scenarios.push_back(r.scenario);
  std::sort(scenarios.begin(), scenarios.end(),
            [](ScenarioKind a, ScenarioKind b) { return static_cast<int>(a) < static_cast<int>(b); });

  using ConfigKey = std::tuple<std::string, int, bool, bool, long>;
  std::map<ConfigKey, std::map<int, const BenchmarkResult*>> pivot;
  for (const auto& r : table.rows)
    pivot[{r.model, r.layers, r.fp, r.adm, r.seed}][static_cast<int>(r.scenario)] = &r;

  std::vector<std::vector<double>> columns;
  CorrelationMatrix cm;
  cm.labels = {"n_params", "fp", "adm"};
  for (ScenarioKind sc : scenarios) cm.labels.push_back("mse_" + scenario_name(sc));
  columns.resize(cm.labels.size());

  for (const auto& [key, by_scenario] : pivot) {
    if (by_scenario.size() != scenarios.size()) continue;  // incomplete configuration
    const BenchmarkResult* any = by_scenario.begin()->second;
    columns[0].push_back(static_cast<double>(any->n_params));
    columns[1].push_back(any->fp ? 1.0 : 0.0);
    columns[2].push_back(any->adm ? 1.0 : 0.0);
    size_t col = 3;
    for (ScenarioKind sc : scenarios)
      columns[col++].push_back(by_scenario.at(static_cast<int>(sc))->mse);
  }

  const size_t d = cm.labels.size();
  const size_t n = columns[0].size();
  std::vector<double> mean(d, 0.0), ss(d, 0.0);
  for (size_t j = 0; j < d; ++j) {
    for (double v : columns[j]) mean[j] += v;
    if (n) mean[j] /= static_cast<double>(n);
    for (double v : columns[j]) ss[j] += (v - mean[j]) * (v - mean[j]);
  }

  cm.r.assign(d, std::vector<std::optional<double>>(d));
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j < d; ++j) {
      if (n < 2 || ss[i] == 0.0 || ss[j] == 0.0) continue;  // undefined -> absent
      if (i == j) {
        cm.r[i][j] = 1.0;
        continue;
      }
      double cov = 0.0;
      for (size_t k = 0; k < n; ++k)
        cov += (columns[i][k] - mean[i]) * (columns[j][k] - mean[j]);
      cm.r[i][j] = cov / std::sqrt(ss[i] * ss[j]);
    }
  }
  return cm;
}

}  // namespace nse::bench

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nse/feature_prop.hpp"
#include "nse/gnn.hpp"
#include "nse/grid.hpp"
#include "nse/powerflow.hpp"
#include "nse/scenario.hpp"
#include "nse/tensor.hpp"

// Training/evaluation harness: the five transfer scenarios, the
// hyperparameter grid search, the results table and the report analyses.
namespace nse::bench {

enum class ScenarioKind { OD, TC1, TC2, PQ2MV, MV2PQ };

// Lowercase short names as used in results.csv and on the command line.
std::string scenario_name(ScenarioKind kind);
ScenarioKind scenario_from_name(const std::string& name);  // UsageError on unknown

struct BenchmarkResult {
  ScenarioKind scenario = ScenarioKind::OD;
  std::string model;
  int layers = 0;
  bool fp = false;
  bool adm = false;
  double mse = 0.0;
  long n_params = 0;
  long seed = 0;
};

// Ordered collection with unique (scenario, model, layers, fp, adm, seed) keys.
struct ResultsTable {
  std::vector<BenchmarkResult> rows;

  void add(BenchmarkResult row);  // ValidationError on duplicate key
  void sort();                    // by (scenario, model, layers, fp, adm, seed)
};

// results.csv: header `scenario,model,layers,fp,adm,mse,n_params,seed`,
// booleans True/False, mse with 6 significant digits. Write/read/write is
// byte-identical.
std::string results_to_csv(const ResultsTable& table);
ResultsTable results_from_csv(const std::string& text);
void save_results(const std::string& path, const ResultsTable& table);
ResultsTable load_results(const std::string& path);

struct TrainOptions {
  int epochs = 200;
  nn::AdamConfig adam;            // lr 1e-2 by default
  fp::PropagationConfig prop;     // input completion when use_fp
  double observability = 0.5;     // baseline observed fraction
};

// Ground-truth voltages per fused node (v_real, v_imag, in pu).
Mat node_targets(const grid::ElectricalGraph& graph, const pf::Snapshot& snap);

// Model input (node x 3): observed voltages, zeros or feature propagation for
// the unobserved ones (per use_fp), plus the observed flag channel.
Mat node_features(const grid::ElectricalGraph& graph, const pf::Snapshot& snap,
                  const scen::ObservabilityMask& mask, bool use_fp,
                  const fp::PropagationConfig& prop);

// One training source: a graph with its snapshots and the dataset's canonical
// observability mask (used by evaluation; see train_model on how training
// masks are drawn). Multi-element lists train across topologies with gradients
// pooled per epoch (entry-weighted, equivalent to one MSE over the union of
// nodes).
struct TrainSet {
  const grid::ElectricalGraph* graph = nullptr;
  const std::vector<pf::Snapshot>* snaps = nullptr;
  scen::ObservabilityMask mask;
};

// Full-batch Adam on the masked-input MSE against ground truth at every node.
// Each epoch draws a fresh random sensor subset per snapshot at
// opts.observability (seeded from config.seed), so the model learns the
// observability level itself and transfers to measurement sets it never saw;
// the per-dataset mask in TrainSet is reserved for evaluation.
gnn::GnnModel train_model(const gnn::ModelConfig& config, const std::vector<TrainSet>& sets,
                          const TrainOptions& opts);

// Mean squared error over both voltage channels, all nodes, all snapshots,
// with inputs built exactly as in training. The accumulator form feeds the
// pooled multi-dataset means used by the scenarios.
struct SseAccum {
  double sse = 0.0;
  long entries = 0;

  double mse() const { return entries ? sse / static_cast<double>(entries) : 0.0; }
};

double evaluate_mse(const gnn::GnnModel& model, const grid::ElectricalGraph& graph,
                    const std::vector<pf::Snapshot>& snaps, const scen::ObservabilityMask& mask,
                    const TrainOptions& opts);
void accumulate_mse(const gnn::GnnModel& model, const grid::ElectricalGraph& graph,
                    const std::vector<pf::Snapshot>& snaps, const scen::ObservabilityMask& mask,
                    const TrainOptions& opts, SseAccum& acc);
// Generic predictor (features -> node x 2 estimates), for oracles and tests.
double evaluate_mse(const std::function<Mat(const Mat&)>& predictor,
                    const grid::ElectricalGraph& graph, const std::vector<pf::Snapshot>& snaps,
                    const scen::ObservabilityMask& mask, const TrainOptions& opts);

// Everything the scenarios consume. Masks are derived from seed and the
// topology ids, so every model configuration sees the same measurement
// layout. `other_*` (the second grid) is only needed for the transfer pair.
struct ScenarioData {
  grid::GridTopology base_topo;
  std::vector<pf::Snapshot> base_series;
  std::vector<scen::TopologyVariant> variants;
  std::vector<std::vector<pf::Snapshot>> variant_series;  // aligned with variants
  std::optional<grid::GridTopology> other_topo;
  std::vector<pf::Snapshot> other_series;
  uint64_t seed = 0;
};

// OD per-level results, worth keeping next to the scenario mean.
struct ScenarioExtras {
  std::vector<std::pair<double, double>> od_curve;  // (observability level, mse)
};

BenchmarkResult run_scenario(ScenarioKind kind, const ScenarioData& data,
                             const gnn::ModelConfig& config, long seed, const TrainOptions& opts,
                             ScenarioExtras* extras = nullptr);

struct GridSpace {
  std::vector<gnn::LayerKind> models{gnn::LayerKind::GCN, gnn::LayerKind::GAT,
                                     gnn::LayerKind::GIN, gnn::LayerKind::GraphSAGE};
  std::vector<int> layers{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<bool> fps{false, true};
  std::vector<bool> adms{false, true};
  int hidden_dim = 4;  // fixed width across the swept dimensions

  size_t size() const { return models.size() * layers.size() * fps.size() * adms.size(); }
};

// One row per (scenario, config, seed); failed configurations become log
// entries instead of rows and never abort the sweep. Work items run in
// parallel into preassigned slots, so the output is thread-count independent.
ResultsTable grid_search(const std::vector<ScenarioKind>& scenarios, const GridSpace& space,
                         const ScenarioData& data, const std::vector<long>& seeds,
                         const TrainOptions& opts, std::vector<std::string>* errors = nullptr);

// Best in-distribution MSE over the space: train on the chronological first
// half of the base series, evaluate on the second half, take the minimum.
double baseline_mse(const ScenarioData& data, const GridSpace& space,
                    const std::vector<long>& seeds, const TrainOptions& opts);

ResultsTable truncate_results(const ResultsTable& table, int max_layers = 7);

struct AugmentationSummary {
  ScenarioKind scenario = ScenarioKind::OD;
  bool fp = false;
  bool adm = false;
  double mean_mse = 0.0;
  int rows = 0;
};

// Mean MSE grouped by (fp, adm) within each scenario; 4 rows per scenario.
std::vector<AugmentationSummary> aggregate_augmentations(const ResultsTable& table);

// Pearson correlations over the columns {n_params, fp, adm, one mse column
// per scenario}; configurations missing any scenario are dropped. Undefined
// coefficients (zero variance) are absent.
struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> r;
};

CorrelationMatrix correlation_matrix(const ResultsTable& table);

}  // namespace nse::bench

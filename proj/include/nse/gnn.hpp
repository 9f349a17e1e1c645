#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nse/grid.hpp"
#include "nse/tensor.hpp"

// The four message-passing layer kinds and the configurable model stack.
// Models read 3 input channels per node (v_real, v_imag, observed_flag) and
// emit 2 (v_real, v_imag); every layer keeps one output row per input node.
namespace nse::gnn {

enum class LayerKind { GCN, GAT, GIN, GraphSAGE };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);  // UsageError on unknown

struct ModelConfig {
  LayerKind kind = LayerKind::GCN;
  int layers = 2;       // stack depth, 1..10
  int hidden_dim = 4;
  bool use_fp = false;  // feature propagation on inputs
  bool use_adm = false; // admittance edge weights in the layers
  uint64_t seed = 0;
};

void validate(const ModelConfig& config);

// Immutable per-graph structures shared by all layers and epochs. Built once
// per (graph, use_adm); with use_adm=false every edge weight is taken as 1,
// so outputs cannot depend on the stored admittances.
struct LayerGraph {
  int node_count = 0;
  Csr gcn_norm;    // D^(-1/2) (A+I) D^(-1/2), symmetric
  Csr adj;         // weighted adjacency, no self-loops, symmetric
  Csr mean_adj;    // row-normalized adjacency (weighted neighbor mean)
  Csr mean_adj_t;  // its transpose, for the backward pass
  // Directed edge list including self-loops, grouped by destination.
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<double> edge_log_w;  // log edge weight (0 for self-loops)
  nn::SegmentIndex by_dst;         // one segment per destination node
};

LayerGraph build_layer_graph(const grid::ElectricalGraph& graph, bool use_edge_weights);

// k disjoint copies of the graph on k * node_count nodes; lets a whole batch
// of snapshots run as one forward pass. Copy 0 keeps the slack node id.
grid::ElectricalGraph disjoint_union(const grid::ElectricalGraph& graph, int copies);

struct GnnModel {
  ModelConfig config;
  int in_channels = 3;
  int out_channels = 2;
  std::vector<nn::Parameter> params;
  // Constant added to the readout output (1 x out_channels, empty = none).
  // build_model sets channel 0 to the nominal per-unit voltage so the stack
  // only has to learn the deviation from a flat 1 + 0j profile.
  Mat output_offset;

  // Full forward pass. features is a tape node of shape node_count x
  // in_channels. When param_ids is given the parameters are pushed as
  // trainable leaves and their tape ids are appended (aligned with params),
  // so callers can read gradients after backward(); otherwise parameters
  // enter as constants.
  int forward(nn::Tape& tape, const LayerGraph& graph, int features,
              std::vector<int>* param_ids = nullptr) const;
};

GnnModel build_model(const ModelConfig& config, int in_channels = 3, int out_channels = 2);

// Gradient-free convenience wrapper: builds the LayerGraph from the
// electrical graph (honoring config.use_adm) and runs one forward pass.
Mat predict(const GnnModel& model, const grid::ElectricalGraph& graph, const Mat& features);
Mat predict(const GnnModel& model, const LayerGraph& graph, const Mat& features);

long count_parameters(const std::vector<nn::Parameter>& params);
long count_parameters(const GnnModel& model);

// Mean per-channel population variance across nodes; 0 iff the output is
// constant over nodes (fully over-smoothed).
double smoothness_metric(const Mat& outputs);

}  // namespace nse::gnn

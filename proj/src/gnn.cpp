#include "nse/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace nse::gnn {

using grid::ElectricalGraph;

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::GCN: return "GCN";
    case LayerKind::GAT: return "GAT";
    case LayerKind::GIN: return "GIN";
    case LayerKind::GraphSAGE: return "GraphSAGE";
  }
  throw ValidationError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gcn") return LayerKind::GCN;
  if (lower == "gat") return LayerKind::GAT;
  if (lower == "gin") return LayerKind::GIN;
  if (lower == "graphsage" || lower == "sage") return LayerKind::GraphSAGE;
  throw UsageError("unknown model '" + name + "' (valid: GCN, GAT, GIN, GraphSAGE)");
}

void validate(const ModelConfig& config) {
  if (config.layers < 1 || config.layers > 10)
    throw ValidationError("layers must be in [1,10]");
  if (config.hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1");
}

namespace {

Csr csr_from_triplets(int n, std::vector<std::tuple<int, int, double>> trips) {
  std::sort(trips.begin(), trips.end());
  Csr m;
  m.rows = m.cols = n;
  m.ptr.assign(n + 1, 0);
  for (const auto& t : trips) m.ptr[std::get<0>(t) + 1]++;
  for (int r = 0; r < n; ++r) m.ptr[r + 1] += m.ptr[r];
  m.idx.reserve(trips.size());
  m.val.reserve(trips.size());
  for (const auto& t : trips) {
    m.idx.push_back(std::get<1>(t));
    m.val.push_back(std::get<2>(t));
  }
  return m;
}

Csr csr_transpose(const Csr& m) {
  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(m.val.size());
  for (int r = 0; r < m.rows; ++r)
    for (int p = m.ptr[r]; p < m.ptr[r + 1]; ++p)
      trips.emplace_back(m.idx[p], r, m.val[p]);
  Csr t = csr_from_triplets(m.cols, std::move(trips));
  t.rows = m.cols;
  t.cols = m.rows;
  return t;
}

}  // namespace

LayerGraph build_layer_graph(const ElectricalGraph& graph, bool use_edge_weights) {
  ElectricalGraph g = graph;
  if (!use_edge_weights)
    for (auto& e : g.edges) e.weight = 1.0;

  LayerGraph lg;
  lg.node_count = g.node_count;
  lg.gcn_norm = grid::normalized_adjacency(g, /*add_self_loops=*/true);

  const int n = g.node_count;
  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(2 * g.edges.size());
  std::vector<double> degree(n, 0.0);
  for (const auto& e : g.edges) {
    trips.emplace_back(e.u, e.v, e.weight);
    trips.emplace_back(e.v, e.u, e.weight);
    degree[e.u] += e.weight;
    degree[e.v] += e.weight;
  }
  lg.adj = csr_from_triplets(n, trips);

  for (auto& t : trips) std::get<2>(t) /= degree[std::get<0>(t)];
  lg.mean_adj = csr_from_triplets(n, std::move(trips));
  lg.mean_adj_t = csr_transpose(lg.mean_adj);

  // Directed edges grouped by destination, one self-loop per node.
  std::vector<std::tuple<int, int, double>> directed;  // (dst, src, w)
  directed.reserve(2 * g.edges.size() + n);
  for (const auto& e : g.edges) {
    directed.emplace_back(e.v, e.u, e.weight);
    directed.emplace_back(e.u, e.v, e.weight);
  }
  for (int i = 0; i < n; ++i) directed.emplace_back(i, i, 1.0);
  std::sort(directed.begin(), directed.end());
  lg.by_dst.offsets.assign(n + 1, 0);
  for (const auto& [dst, src, w] : directed) {
    lg.edge_dst.push_back(dst);
    lg.edge_src.push_back(src);
    lg.edge_log_w.push_back(std::log(w));
    lg.by_dst.offsets[dst + 1]++;
  }
  for (int i = 0; i < n; ++i) lg.by_dst.offsets[i + 1] += lg.by_dst.offsets[i];
  return lg;
}

ElectricalGraph disjoint_union(const ElectricalGraph& graph, int copies) {
  if (copies < 1) throw ValidationError("disjoint_union needs at least one copy");
  ElectricalGraph out;
  out.node_count = graph.node_count * copies;
  out.slack_node = graph.slack_node;
  out.bus_to_node = graph.bus_to_node;
  out.edges.reserve(graph.edges.size() * copies);
  for (int k = 0; k < copies; ++k) {
    const int off = k * graph.node_count;
    for (const auto& e : graph.edges)
      out.edges.push_back({e.u + off, e.v + off, e.weight});
  }
  return out;
}

namespace {

struct ParamPusher {
  nn::Tape& tape;
  const std::vector<nn::Parameter>& params;
  std::vector<int>* ids;
  size_t next = 0;

  int push() {
    if (next >= params.size()) throw ValidationError("model parameter list out of sync");
    int id = tape.leaf(params[next].value, ids != nullptr);
    if (ids) ids->push_back(id);
    ++next;
    return id;
  }
};

int gcn_forward(nn::Tape& t, const LayerGraph& g, int h, ParamPusher& pp) {
  int w = pp.push(), b = pp.push();
  return t.add(t.spmm(&g.gcn_norm, &g.gcn_norm, t.matmul(h, w)), b);
}

int gat_forward(nn::Tape& t, const LayerGraph& g, int h, ParamPusher& pp, bool use_adm) {
  int w = pp.push(), a_src = pp.push(), a_dst = pp.push();
  int wh = t.matmul(h, w);
  int s_src = t.matmul(wh, a_src);
  int s_dst = t.matmul(wh, a_dst);
  int e = t.add(t.gather_rows(s_src, g.edge_src), t.gather_rows(s_dst, g.edge_dst));
  e = t.leaky_relu(e, 0.2);
  if (use_adm) {
    Mat logw(static_cast<int>(g.edge_log_w.size()), 1);
    std::copy(g.edge_log_w.begin(), g.edge_log_w.end(), logw.data.begin());
    e = t.add(e, t.leaf(std::move(logw)));
  }
  int alpha = t.neighbor_softmax(e, g.by_dst);
  int msg = t.mul(t.gather_rows(wh, g.edge_src), alpha);
  return t.segment_sum(msg, g.by_dst);
}

int gin_forward(nn::Tape& t, const LayerGraph& g, int h, ParamPusher& pp) {
  int eps = pp.push();
  int w1 = pp.push(), b1 = pp.push(), w2 = pp.push(), b2 = pp.push();
  int one = t.leaf(Mat(1, 1, 1.0));
  int pre = t.add(t.mul(h, t.add(one, eps)), t.spmm(&g.adj, &g.adj, h));
  int hid = t.relu(t.add(t.matmul(pre, w1), b1));
  return t.add(t.matmul(hid, w2), b2);
}

int sage_forward(nn::Tape& t, const LayerGraph& g, int h, ParamPusher& pp) {
  int w_self = pp.push(), w_neigh = pp.push(), b = pp.push();
  int agg = t.spmm(&g.mean_adj, &g.mean_adj_t, h);
  return t.add(t.add(t.matmul(h, w_self), t.matmul(agg, w_neigh)), b);
}

}  // namespace

int GnnModel::forward(nn::Tape& tape, const LayerGraph& graph, int features,
                      std::vector<int>* param_ids) const {
  const Mat& x = tape.val(features);
  if (x.rows != graph.node_count)
    throw ValidationError("feature rows != graph node count");
  if (x.cols != in_channels) throw ValidationError("feature channels != model input channels");

  ParamPusher pp{tape, params, param_ids};
  int h = features;
  for (int l = 0; l < config.layers; ++l) {
    switch (config.kind) {
      case LayerKind::GCN: h = gcn_forward(tape, graph, h, pp); break;
      case LayerKind::GAT: h = gat_forward(tape, graph, h, pp, config.use_adm); break;
      case LayerKind::GIN: h = gin_forward(tape, graph, h, pp); break;
      case LayerKind::GraphSAGE: h = sage_forward(tape, graph, h, pp); break;
    }
    if (l + 1 < config.layers) h = tape.relu(h);
  }
  int w = pp.push(), b = pp.push();
  h = tape.add(tape.matmul(h, w), b);
  if (!output_offset.data.empty()) h = tape.add(h, tape.leaf(output_offset));
  if (pp.next != params.size()) throw ValidationError("model parameter list out of sync");
  return h;
}

namespace {

void add_layer_params(std::vector<nn::Parameter>& out, const ModelConfig& cfg, int index,
                      int fin, int fout) {
  const std::string prefix = "layer" + std::to_string(index) + ".";
  auto seed = [&](int tensor) { return mix_seed(cfg.seed, "layer", {index, tensor}); };
  switch (cfg.kind) {
    case LayerKind::GCN:
      out.push_back({prefix + "W", nn::glorot_uniform(fin, fout, seed(0)), {}});
      out.push_back({prefix + "b", Mat(1, fout), {}});
      break;
    case LayerKind::GAT:
      out.push_back({prefix + "W", nn::glorot_uniform(fin, fout, seed(0)), {}});
      out.push_back({prefix + "a_src", nn::glorot_uniform(fout, 1, seed(1)), {}});
      out.push_back({prefix + "a_dst", nn::glorot_uniform(fout, 1, seed(2)), {}});
      break;
    case LayerKind::GIN:
      out.push_back({prefix + "eps", Mat(1, 1), {}});
      out.push_back({prefix + "W1", nn::glorot_uniform(fin, fout, seed(0)), {}});
      out.push_back({prefix + "b1", Mat(1, fout), {}});
      out.push_back({prefix + "W2", nn::glorot_uniform(fout, fout, seed(1)), {}});
      out.push_back({prefix + "b2", Mat(1, fout), {}});
      break;
    case LayerKind::GraphSAGE:
      out.push_back({prefix + "W_self", nn::glorot_uniform(fin, fout, seed(0)), {}});
      out.push_back({prefix + "W_neigh", nn::glorot_uniform(fin, fout, seed(1)), {}});
      out.push_back({prefix + "b", Mat(1, fout), {}});
      break;
  }
}

}  // namespace

GnnModel build_model(const ModelConfig& config, int in_channels, int out_channels) {
  validate(config);
  if (in_channels < 1 || out_channels < 1)
    throw ValidationError("channel counts must be positive");
  GnnModel model;
  model.config = config;
  model.in_channels = in_channels;
  model.out_channels = out_channels;
  for (int l = 0; l < config.layers; ++l)
    add_layer_params(model.params, config, l, l == 0 ? in_channels : config.hidden_dim,
                     config.hidden_dim);
  model.params.push_back({"readout.W",
                          nn::glorot_uniform(config.hidden_dim, out_channels,
                                             mix_seed(config.seed, "readout")),
                          {}});
  model.params.push_back({"readout.b", Mat(1, out_channels), {}});
  // The net predicts the deviation from nominal voltage (1 + 0j per unit), so
  // an uninformed model starts out estimating a flat profile instead of zero.
  model.output_offset = Mat(1, out_channels);
  model.output_offset(0, 0) = 1.0;
  return model;
}

Mat predict(const GnnModel& model, const LayerGraph& graph, const Mat& features) {
  nn::Tape tape;
  int x = tape.leaf(features);
  int out = model.forward(tape, graph, x);
  return tape.val(out);
}

Mat predict(const GnnModel& model, const ElectricalGraph& graph, const Mat& features) {
  return predict(model, build_layer_graph(graph, model.config.use_adm), features);
}

long count_parameters(const std::vector<nn::Parameter>& params) {
  long total = 0;
  for (const auto& p : params) total += static_cast<long>(p.value.size());
  return total;
}

long count_parameters(const GnnModel& model) { return count_parameters(model.params); }

double smoothness_metric(const Mat& outputs) {
  if (outputs.rows == 0 || outputs.cols == 0) return 0.0;
  double total = 0.0;
  for (int c = 0; c < outputs.cols; ++c) {
    double mean = 0.0;
    for (int r = 0; r < outputs.rows; ++r) mean += outputs(r, c);
    mean /= outputs.rows;
    double var = 0.0;
    for (int r = 0; r < outputs.rows; ++r) {
      const double d = outputs(r, c) - mean;
      var += d * d;
    }
    total += var / outputs.rows;
  }
  return total / outputs.cols;
}

}  // namespace nse::gnn

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nse/common.hpp"
#include "nse/grid.hpp"
#include "nse/tensor.hpp"

// Shared helpers for the test binaries: fixture paths, a finite-difference
// gradient checker, random graph/topology generators and a brute-force
// union-find used as the fusion oracle.
namespace tu {

#ifndef NSE_DATA_DIR
#define NSE_DATA_DIR "data"
#endif

inline std::string data_path(const std::string& rel) {
  return std::string(NSE_DATA_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double max_abs_diff(const nse::Mat& a, const nse::Mat& b) {
  if (!a.same_shape(b)) return 1e300;
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline nse::Mat random_mat(nse::Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  nse::Mat m(rows, cols);
  for (auto& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// ---- finite differences ----

// Builds a scalar tape node from requires_grad leaves holding `inputs`.
using FdBuild = std::function<int(nse::nn::Tape&, const std::vector<int>&)>;

inline double fd_eval(const std::vector<nse::Mat>& inputs, const FdBuild& build) {
  nse::nn::Tape tape;
  std::vector<int> ids;
  for (const auto& m : inputs) ids.push_back(tape.leaf(m));
  return tape.val(build(tape, ids))(0, 0);
}

// Max relative error between tape gradients and central differences over
// every entry of every input. Relative to max(1, |g|) so near-zero gradients
// are compared absolutely.
inline double fd_max_rel_error(std::vector<nse::Mat> inputs, const FdBuild& build,
                               double h = 1e-5) {
  nse::nn::Tape tape;
  std::vector<int> ids;
  for (const auto& m : inputs) ids.push_back(tape.leaf(m, true));
  tape.backward(build(tape, ids));

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const nse::Mat& grad = tape.grad(ids[i]);
    for (size_t k = 0; k < inputs[i].size(); ++k) {
      const double keep = inputs[i].data[k];
      inputs[i].data[k] = keep + h;
      const double up = fd_eval(inputs, build);
      inputs[i].data[k] = keep - h;
      const double down = fd_eval(inputs, build);
      inputs[i].data[k] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double g = grad.size() ? grad.data[k] : 0.0;
      worst = std::max(worst, std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)}));
    }
  }
  return worst;
}

// ---- random graphs ----

// Connected undirected graph: random spanning tree plus extra edges, weights
// uniform in [0.2, 5]. Returned as an ElectricalGraph with identity bus map.
inline nse::grid::ElectricalGraph random_graph(nse::Rng& rng, int n, bool weighted = true,
                                               int extra_edges = -1) {
  nse::grid::ElectricalGraph g;
  g.node_count = n;
  g.slack_node = 0;
  for (int i = 0; i < n; ++i) g.bus_to_node[i + 1] = i;

  std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
  auto add = [&](int u, int v) {
    if (u == v || has[u][v]) return false;
    has[u][v] = has[v][u] = true;
    g.edges.push_back({std::min(u, v), std::max(u, v), weighted ? rng.uniform(0.2, 5.0) : 1.0});
    return true;
  };
  for (int v = 1; v < n; ++v) add(rng.uniform_int(v), v);
  if (extra_edges < 0) extra_edges = n / 3;
  for (int e = 0; e < extra_edges; ++e) add(rng.uniform_int(n), rng.uniform_int(n));
  return g;
}

// Permutation helpers for equivariance checks. perm[old] = new index.
inline nse::grid::ElectricalGraph permute_graph(const nse::grid::ElectricalGraph& g,
                                                const std::vector<int>& perm) {
  nse::grid::ElectricalGraph out;
  out.node_count = g.node_count;
  out.slack_node = g.slack_node >= 0 ? perm[g.slack_node] : -1;
  for (const auto& [bus, node] : g.bus_to_node) out.bus_to_node[bus] = perm[node];
  for (const auto& e : g.edges) {
    const int u = perm[e.u], v = perm[e.v];
    out.edges.push_back({std::min(u, v), std::max(u, v), e.weight});
  }
  return out;
}

inline nse::Mat permute_rows(const nse::Mat& m, const std::vector<int>& perm) {
  nse::Mat out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out(perm[r], c) = m(r, c);
  return out;
}

// ---- fusion oracle ----

struct UnionFind {
  std::vector<int> parent;

  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Random topology exercising fusion: a line spanning tree keeps the grid
// connected, then switches (mixed open/closed, some out of service) are laid
// over random bus pairs so the closed-switch graph has chains, stars and
// cycles.
inline nse::grid::GridTopology random_switch_topology(nse::Rng& rng, int n_buses, int n_switches) {
  nse::grid::GridTopology topo;
  for (int i = 0; i < n_buses; ++i) {
    nse::grid::Bus b;
    b.id = i + 1;
    b.nominal_kv = 10.0;
    b.kind = i == 0 ? nse::grid::BusKind::Slack : nse::grid::BusKind::Load;
    topo.buses.push_back(b);
  }
  int next_id = 100;
  for (int v = 1; v < n_buses; ++v) {
    nse::grid::Branch br;
    br.id = next_id++;
    br.from_bus = rng.uniform_int(v) + 1;
    br.to_bus = v + 1;
    br.kind = nse::grid::BranchKind::Line;
    br.r_ohm = rng.uniform(0.1, 1.0);
    br.x_ohm = rng.uniform(0.1, 1.0);
    topo.branches.push_back(br);
  }
  for (int s = 0; s < n_switches; ++s) {
    const int a = rng.uniform_int(n_buses) + 1;
    const int b = rng.uniform_int(n_buses) + 1;
    if (a == b) continue;
    nse::grid::Branch br;
    br.id = next_id++;
    br.from_bus = a;
    br.to_bus = b;
    br.kind = nse::grid::BranchKind::Switch;
    br.closed = rng.uniform01() < 0.6;
    br.in_service = rng.uniform01() < 0.9;
    topo.branches.push_back(br);
  }
  return topo;
}

// ---- subprocess helper for the CLI tests ----

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (size_t got = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string make_temp_dir(const std::string& tag) {
  std::string tmpl = "/tmp/nse-test-" + tag + "-XXXXXX";
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
  return std::string(buf.data());
}

}  // namespace tu

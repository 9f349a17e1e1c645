#include "nse/feature_prop.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <vector>

#include <Eigen/Dense>

#include "nse/kernels.hpp"

namespace nse::fp {

Mat propagate_features(const grid::ElectricalGraph& graph, const Mat& features,
                       const scen::ObservabilityMask& mask, const PropagationConfig& config) {
  if (features.rows != graph.node_count)
    throw ValidationError("feature rows != graph node count");
  if (static_cast<int>(mask.observed.size()) != graph.node_count)
    throw ValidationError("mask length != graph node count");
  if (!(config.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");

  const int n = graph.node_count;
  const int c = features.cols;
  if (mask.empty()) return Mat(n, c);

  // Warn about nodes no observed value can ever reach.
  {
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : graph.edges) {
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    std::vector<char> reached(n, 0);
    std::deque<int> queue;
    for (int i = 0; i < n; ++i)
      if (mask.observed[i]) {
        reached[i] = 1;
        queue.push_back(i);
      }
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[u])
        if (!reached[v]) {
          reached[v] = 1;
          queue.push_back(v);
        }
    }
    int unreachable = 0;
    for (int i = 0; i < n; ++i)
      if (!reached[i]) ++unreachable;
    if (unreachable > 0)
      std::cerr << "warning: " << unreachable
                << " node(s) unreachable from any observed node; filled with the observed mean\n";
  }

  // Per-channel mean of the observed rows: the starting value of every
  // unobserved row and the final value of unreachable ones.
  std::vector<double> mean(c, 0.0);
  int observed_count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask.observed[i]) continue;
    ++observed_count;
    for (int j = 0; j < c; ++j) mean[j] += features(i, j);
  }
  for (int j = 0; j < c; ++j) mean[j] /= observed_count;

  Mat x(n, c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) x(i, j) = mask.observed[i] ? features(i, j) : mean[j];

  const Csr p = grid::row_normalized_adjacency(graph);
  Mat next(n, c);
  for (int it = 0; it < config.max_iterations; ++it) {
    kernels::spmm(p, x.data.data(), next.data.data(), c);
    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask.observed[i] || p.ptr[i] == p.ptr[i + 1]) {
        // Boundary rows reset; isolated rows keep their fill value.
        for (int j = 0; j < c; ++j) next(i, j) = x(i, j);
        continue;
      }
      for (int j = 0; j < c; ++j) delta = std::max(delta, std::abs(next(i, j) - x(i, j)));
    }
    std::swap(x, next);
    if (delta < config.tolerance) break;
  }
  return x;
}

Mat dirichlet_solve_oracle(const grid::ElectricalGraph& graph, const Mat& features,
                           const scen::ObservabilityMask& mask) {
  if (features.rows != graph.node_count)
    throw ValidationError("feature rows != graph node count");
  if (static_cast<int>(mask.observed.size()) != graph.node_count)
    throw ValidationError("mask length != graph node count");

  const int n = graph.node_count;
  const int c = features.cols;

  // Dense random-walk operator assembled straight from the edge list.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges) {
    w(e.u, e.v) += e.weight;
    w(e.v, e.u) += e.weight;
  }
  Eigen::VectorXd degree = w.rowwise().sum();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    if (degree(i) > 0.0) p.row(i) = w.row(i) / degree(i);

  std::vector<int> unknown;
  for (int i = 0; i < n; ++i)
    if (!mask.observed[i]) unknown.push_back(i);
  const int u = static_cast<int>(unknown.size());

  Mat out = features;
  if (u == 0) return out;

  // Interior rows must satisfy x = P x, i.e. (I - P_UU) x_U = P_UB x_B.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(u, u);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(u, c);
  for (int i = 0; i < u; ++i) {
    for (int k = 0; k < n; ++k) {
      const double pik = p(unknown[i], k);
      if (pik == 0.0) continue;
      if (!mask.observed[k]) {
        auto pos = std::lower_bound(unknown.begin(), unknown.end(), k);
        a(i, static_cast<int>(pos - unknown.begin())) -= pik;
      } else {
        for (int j = 0; j < c; ++j) rhs(i, j) += pik * features(k, j);
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw NumericError("Dirichlet system is singular: unobserved nodes disconnected from boundary");
  Eigen::MatrixXd sol = lu.solve(rhs);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < c; ++j) out(unknown[i], j) = sol(i, j);
  return out;
}

}  // namespace nse::fp

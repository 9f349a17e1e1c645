#include "nse/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace nse::pf {

using grid::Branch;
using grid::BranchKind;
using grid::BusKind;
using grid::GridTopology;
using nlohmann::json;

namespace {

// Union of buses over zero-impedance couplings (closed switches, in-service
// transformers): electrical nodes of the solver.
struct NodeMap {
  std::map<int, int> bus_to_node;
  std::vector<std::vector<int>> node_buses;
  int slack_node = -1;
};

NodeMap electrical_nodes(const GridTopology& topo) {
  std::map<int, int> parent;
  for (const auto& b : topo.buses) parent[b.id] = b.id;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& br : topo.branches) {
    const bool fuses = br.in_service && ((br.kind == BranchKind::Switch && br.closed) ||
                                         br.kind == BranchKind::Transformer);
    if (!fuses) continue;
    int a = find(br.from_bus), b = find(br.to_bus);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  NodeMap nm;
  std::map<int, int> rep_index;
  for (const auto& b : topo.buses) {
    int rep = find(b.id);
    if (!rep_index.count(rep)) {
      rep_index[rep] = static_cast<int>(nm.node_buses.size());
      nm.node_buses.push_back({});
    }
    nm.bus_to_node[b.id] = rep_index[rep];
    nm.node_buses[rep_index[rep]].push_back(b.id);
  }
  nm.slack_node = nm.bus_to_node.at(topo.slack_bus_id());
  return nm;
}

}  // namespace

VoltageSolution solve_power_flow(const GridTopology& topo, const PowerInjection& inj,
                                 double tol, int max_iter) {
  grid::validate(topo);
  if (!(tol > 0.0)) throw ValidationError("power flow tolerance must be positive");

  const NodeMap nm = electrical_nodes(topo);
  const int n = static_cast<int>(nm.node_buses.size());

  // Per-unit admittance matrix from in-service lines. System base 1 MVA;
  // impedance base from the line's from-bus nominal kV.
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  std::map<int, double> kv_of_bus;
  for (const auto& b : topo.buses) kv_of_bus[b.id] = b.nominal_kv;
  for (const auto& br : topo.branches) {
    if (br.kind != BranchKind::Line || !br.in_service) continue;
    const double kv = kv_of_bus.at(br.from_bus);
    const std::complex<double> z_pu(br.r_ohm / (kv * kv), br.x_ohm / (kv * kv));
    const std::complex<double> y = 1.0 / z_pu;
    const int i = nm.bus_to_node.at(br.from_bus);
    const int j = nm.bus_to_node.at(br.to_bus);
    if (i == j) continue;  // line inside a fused node carries no flow
    Y(i, i) += y;
    Y(j, j) += y;
    Y(i, j) -= y;
    Y(j, i) -= y;
  }

  // Net per-unit injection per node (fused bus injections add). Slack-node
  // entries are ignored per convention.
  const int slack = nm.slack_node;
  Eigen::VectorXd p_spec = Eigen::VectorXd::Zero(n), q_spec = Eigen::VectorXd::Zero(n);
  for (const auto& b : topo.buses) {
    if (nm.bus_to_node.at(b.id) == slack) continue;
    auto it = inj.find(b.id);
    if (it == inj.end())
      throw ValidationError("missing injection for non-slack bus " + std::to_string(b.id));
    p_spec[nm.bus_to_node.at(b.id)] += it->second.p_mw;
    q_spec[nm.bus_to_node.at(b.id)] += it->second.q_mvar;
  }

  // Unknown ordering: [theta..., v...] over non-slack nodes.
  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  Eigen::VectorXd vmag = Eigen::VectorXd::Ones(n), theta = Eigen::VectorXd::Zero(n);

  auto calc_power = [&](Eigen::VectorXd& p, Eigen::VectorXd& q) {
    p.setZero(n);
    q.setZero(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::complex<double> y = Y(i, j);
        if (y == 0.0 && i != j) continue;
        const double th = theta[i] - theta[j];
        const double g = y.real(), b = y.imag();
        p[i] += vmag[i] * vmag[j] * (g * std::cos(th) + b * std::sin(th));
        q[i] += vmag[i] * vmag[j] * (g * std::sin(th) - b * std::cos(th));
      }
    }
  };

  VoltageSolution sol;
  Eigen::VectorXd p_calc(n), q_calc(n);
  for (int iter = 0; iter <= max_iter; ++iter) {
    calc_power(p_calc, q_calc);
    double max_mis = 0.0;
    Eigen::VectorXd rhs(2 * m);
    for (int a = 0; a < m; ++a) {
      rhs[a] = p_spec[pq[a]] - p_calc[pq[a]];
      rhs[m + a] = q_spec[pq[a]] - q_calc[pq[a]];
      max_mis = std::max({max_mis, std::abs(rhs[a]), std::abs(rhs[m + a])});
    }
    sol.mismatch_history.push_back(max_mis);
    sol.max_mismatch = max_mis;
    sol.iterations = iter;
    if (max_mis < tol) {
      sol.converged = true;
      break;
    }
    if (iter == max_iter) break;

    // Standard polar Jacobian [dP/dtheta dP/dV; dQ/dtheta dQ/dV].
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int a = 0; a < m; ++a) {
      const int i = pq[a];
      for (int b = 0; b < m; ++b) {
        const int j = pq[b];
        const double g = Y(i, j).real(), bij = Y(i, j).imag();
        if (i == j) {
          J(a, b) = -q_calc[i] - bij * vmag[i] * vmag[i];
          J(a, m + b) = p_calc[i] / vmag[i] + g * vmag[i];
          J(m + a, b) = p_calc[i] - g * vmag[i] * vmag[i];
          J(m + a, m + b) = q_calc[i] / vmag[i] - bij * vmag[i];
        } else {
          const double th = theta[i] - theta[j];
          const double s = std::sin(th), c = std::cos(th);
          J(a, b) = vmag[i] * vmag[j] * (g * s - bij * c);
          J(a, m + b) = vmag[i] * (g * c + bij * s);
          J(m + a, b) = -vmag[i] * vmag[j] * (g * c + bij * s);
          J(m + a, m + b) = vmag[i] * (g * s - bij * c);
        }
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) throw NumericError("singular power-flow Jacobian");
    const Eigen::VectorXd dx = lu.solve(rhs);
    for (int a = 0; a < m; ++a) {
      theta[pq[a]] += dx[a];
      vmag[pq[a]] += dx[m + a];
    }
  }

  for (const auto& b : topo.buses) {
    const int node = nm.bus_to_node.at(b.id);
    sol.v[b.id] = BusVoltage{vmag[node], theta[node]};
  }
  // Slack is the reference by construction.
  sol.v[topo.slack_bus_id()] = BusVoltage{1.0, 0.0};
  return sol;
}

std::vector<Snapshot> generate_time_series(const GridTopology& topo, int n_steps,
                                           const LoadProfileSpec& spec, uint64_t seed,
                                           const std::string& topology_id, uint64_t bases_seed) {
  if (n_steps < 1) throw ValidationError("n_steps must be >= 1");
  grid::validate(topo);

  // Per-bus base loads, fixed for the whole series.
  Rng base_rng(mix_seed(bases_seed ? bases_seed : seed, "bases"));
  std::map<int, double> base_p;
  const int slack_id = topo.slack_bus_id();
  for (const auto& b : topo.buses)
    if (b.id != slack_id)
      base_p[b.id] = spec.base_p_mw * base_rng.uniform(1.0 - spec.spread, 1.0 + spec.spread);

  std::vector<Snapshot> snaps;
  snaps.reserve(n_steps);
  for (int t = 0; t < n_steps; ++t) {
    Rng step_rng(mix_seed(seed, "step", {t}));
    const double shape =
        1.0 + spec.shape_amplitude *
                  std::sin(2.0 * std::numbers::pi * t / spec.steps_per_day - std::numbers::pi / 2);
    Snapshot s;
    s.topology_id = topology_id;
    for (const auto& b : topo.buses) {
      if (b.id == slack_id) continue;
      const double np = 1.0 + spec.noise * step_rng.uniform(-1.0, 1.0);
      const double nq = 1.0 + spec.noise * step_rng.uniform(-1.0, 1.0);
      const double p = base_p.at(b.id) * shape;
      s.injections[b.id] = BusPower{-p * np, -spec.q_ratio * p * nq};
    }
    s.voltages = solve_power_flow(topo, s.injections);
    if (!s.voltages.converged)
      throw NumericError("power flow did not converge at step " + std::to_string(t));
    snaps.push_back(std::move(s));
  }
  return snaps;
}

void write_snapshots(std::ostream& out, const std::vector<Snapshot>& snaps) {
  for (const auto& s : snaps) {
    json rec;
    rec["topology_id"] = s.topology_id;
    rec["injections"] = json::array();
    for (const auto& [bus, bp] : s.injections)
      rec["injections"].push_back({{"bus", bus}, {"p_mw", bp.p_mw}, {"q_mvar", bp.q_mvar}});
    rec["voltages"] = json::array();
    for (const auto& [bus, bv] : s.voltages.v)
      rec["voltages"].push_back({{"bus", bus}, {"v_pu", bv.v_pu}, {"theta_rad", bv.theta_rad}});
    out << rec.dump() << "\n";
  }
}

std::vector<Snapshot> read_snapshots(std::istream& in) {
  std::vector<Snapshot> snaps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("snapshot file line " + std::to_string(lineno) + ": " + e.what());
    }
    Snapshot s;
    s.topology_id = rec.at("topology_id").get<std::string>();
    for (const auto& ji : rec.at("injections"))
      s.injections[ji.at("bus").get<int>()] =
          BusPower{ji.at("p_mw").get<double>(), ji.at("q_mvar").get<double>()};
    for (const auto& jv : rec.at("voltages"))
      s.voltages.v[jv.at("bus").get<int>()] =
          BusVoltage{jv.at("v_pu").get<double>(), jv.at("theta_rad").get<double>()};
    s.voltages.converged = true;
    snaps.push_back(std::move(s));
  }
  return snaps;
}

void save_snapshots(const std::string& path, const std::vector<Snapshot>& snaps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write snapshot file '" + path + "'");
  write_snapshots(out, snaps);
}

std::vector<Snapshot> load_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open snapshot file '" + path + "'");
  return read_snapshots(in);
}

}  // namespace nse::pf

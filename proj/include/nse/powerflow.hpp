#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nse/common.hpp"
#include "nse/grid.hpp"

namespace nse::pf {

// Sign convention: consumption negative, generation positive.
struct BusPower {
  double p_mw = 0.0;
  double q_mvar = 0.0;
};
using PowerInjection = std::map<int, BusPower>;  // bus id -> injection

struct BusVoltage {
  double v_pu = 1.0;
  double theta_rad = 0.0;
};

struct VoltageSolution {
  std::map<int, BusVoltage> v;  // bus id -> voltage
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
  std::vector<double> mismatch_history;  // max |dP|,|dQ| before each update
};

struct Snapshot {
  std::string topology_id;
  PowerInjection injections;
  VoltageSolution voltages;
};

// Polar Newton-Raphson on the per-unit bus admittance matrix (1 MVA system
// base, line impedances on the from-bus nominal kV). All non-slack buses are
// PQ; closed switches and in-service transformers are treated as ideal
// zero-impedance couplings, so their buses share one electrical node.
VoltageSolution solve_power_flow(const grid::GridTopology& topo, const PowerInjection& inj,
                                 double tol = 1e-8, int max_iter = 30);

struct LoadProfileSpec {
  double base_p_mw = 0.6;       // nominal per-bus active load
  double spread = 0.5;          // per-bus base drawn uniform in [1-spread, 1+spread] x nominal
  double q_ratio = 0.4;         // reactive load = q_ratio x active
  double noise = 0.2;           // per-step multiplicative uniform noise
  double shape_amplitude = 0.45; // sinusoidal daily shape 1 + a*sin(...)
  int steps_per_day = 96;       // 15-minute resolution
};

// Seeded synthetic load series; one power flow per step. Per-step seeds are
// derived independently so any execution order gives the same snapshots.
// bases_seed fixes the per-bus nominal loads separately from the per-step
// noise: series for topology variants of one grid should share it, since the
// consumers stay put when switching state changes (0 = use seed).
std::vector<Snapshot> generate_time_series(const grid::GridTopology& topo, int n_steps,
                                           const LoadProfileSpec& spec, uint64_t seed,
                                           const std::string& topology_id = "base",
                                           uint64_t bases_seed = 0);

// Snapshot dataset files: one JSON record per line.
void write_snapshots(std::ostream& out, const std::vector<Snapshot>& snaps);
std::vector<Snapshot> read_snapshots(std::istream& in);
void save_snapshots(const std::string& path, const std::vector<Snapshot>& snaps);
std::vector<Snapshot> load_snapshots(const std::string& path);

}  // namespace nse::pf

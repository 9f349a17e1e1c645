#pragma once

#include "nse/common.hpp"
#include "nse/grid.hpp"
#include "nse/scenario.hpp"

// Fill unobserved node features by graph diffusion with the observed rows
// held fixed as boundary conditions (discrete Dirichlet problem).
namespace nse::fp {

struct PropagationConfig {
  double tolerance = 1e-6;
  int max_iterations = 1000;
};

// Iterates X <- P X with P = D^(-1) A (row-normalized weighted adjacency, no
// self-loops), resetting observed rows to their inputs after every sweep,
// until the max-abs change drops below tolerance or max_iterations is hit.
// Unobserved rows start at the per-channel mean of the observed rows, so
// every iterate stays inside the observed value range; nodes unreachable
// from any observed node keep that mean (a warning is emitted). An empty
// mask returns all zeros. Observed rows of the result equal the input bits.
Mat propagate_features(const grid::ElectricalGraph& graph, const Mat& features,
                       const scen::ObservabilityMask& mask, const PropagationConfig& config = {});

// Exact dense solve of the same boundary-value problem, assembled
// independently of the iterative path; test oracle for small graphs.
// Throws NumericError when an unobserved node is disconnected from every
// observed node (singular system).
Mat dirichlet_solve_oracle(const grid::ElectricalGraph& graph, const Mat& features,
                           const scen::ObservabilityMask& mask);

}  // namespace nse::fp

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nse/common.hpp"
#include "nse/grid.hpp"

namespace nse::scen {

// Which fused nodes carry a voltage measurement. The slack node, when given,
// is always part of the observed set as long as anything is observed (the
// phase reference must be anchored); the sampled count still equals
// round(fraction * node_count).
struct ObservabilityMask {
  std::vector<bool> observed;
  double fraction = 0.0;
  int slack_node = -1;

  int count() const;
  bool empty() const { return count() == 0; }
};

ObservabilityMask sample_observability_mask(int node_count, double fraction, uint64_t seed,
                                            int slack_node = -1);

// Sub-mask with fraction = level; observed nodes are removed uniformly at
// random (slack last), so chains of degradations are nested.
ObservabilityMask degrade_observability(const ObservabilityMask& mask, double level,
                                        uint64_t seed);

// One simulated fault-and-resupply: a line on the feeder served by an open
// loop switch goes out of service and the switch closes.
struct TopologyVariant {
  std::string base_topology_id;
  int disabled_line_id = -1;
  int closed_switch_id = -1;
  grid::GridTopology variant_topology;
  std::string variant_id;
};

std::vector<TopologyVariant> make_topology_variants(const grid::GridTopology& topo,
                                                    const std::string& base_topology_id = "base");

// Disjoint seeded random split; sizes differ by at most one.
std::pair<std::vector<TopologyVariant>, std::vector<TopologyVariant>> split_variants(
    const std::vector<TopologyVariant>& variants, double ratio, uint64_t seed);

// Variant manifest file: list of {variant_id, disabled_line_id, closed_switch_id}.
std::string variants_to_json(const std::vector<TopologyVariant>& variants);
std::vector<TopologyVariant> variants_from_json(const std::string& text,
                                                const grid::GridTopology& base,
                                                const std::string& base_topology_id = "base");

}  // namespace nse::scen

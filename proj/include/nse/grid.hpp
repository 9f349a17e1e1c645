#pragma once

#include <map>
#include <string>
#include <vector>

#include "nse/common.hpp"

namespace nse::grid {

enum class BusKind { Slack, Load };
enum class BranchKind { Line, Transformer, Switch };

struct Bus {
  int id = 0;
  double nominal_kv = 0.0;
  BusKind kind = BusKind::Load;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  BranchKind kind = BranchKind::Line;
  double r_ohm = 0.0;  // lines only
  double x_ohm = 0.0;  // lines only
  bool closed = false;  // switches only
  bool in_service = true;
};

// Raw engineering description of a grid, as read from a grid file.
struct GridTopology {
  std::vector<Bus> buses;
  std::vector<Branch> branches;

  const Bus* find_bus(int id) const;
  const Branch* find_branch(int id) const;
  int slack_bus_id() const;
};

// Fused, optionally admittance-weighted undirected graph consumed by the
// GNNs and feature propagation.
struct ElectricalGraph {
  struct Edge {
    int u = 0;
    int v = 0;
    double weight = 1.0;
  };
  int node_count = 0;
  int slack_node = -1;
  std::vector<Edge> edges;                // u < v, no self-loops, merged parallels
  std::map<int, int> bus_to_node;         // many-to-one after fusion
};

struct FusionResult {
  std::vector<std::vector<int>> groups;   // one sorted bus-id set per closed-switch component
  std::map<int, int> bus_to_node;         // every bus -> dense node index
  int node_count = 0;
};

// Throws ValidationError on any violated topology invariant.
void validate(const GridTopology& topo);

GridTopology load_grid(const std::string& path);
GridTopology parse_grid(const std::string& json_text);
std::string grid_to_json(const GridTopology& topo);

// Collapse buses joined by closed in-service bus-to-bus switches. Degree-one
// nodes of the auxiliary switch graph are peeled iteratively; any leftover
// switch cycles are collapsed component-wise so groups always equal the
// connected components of the auxiliary graph.
FusionResult fuse_switch_buses(const GridTopology& topo);

// use_admittance: line weight 1/|r+jx|, transformer weight = median line
// admittance; otherwise every edge weight 1. Parallel edges between the same
// fused pair merge by weight summation, self-loops after fusion are dropped.
ElectricalGraph build_electrical_graph(const GridTopology& topo, bool use_admittance);

// D^(-1/2) (A [+ I]) D^(-1/2) over the edge weights, returned as symmetric CSR.
Csr normalized_adjacency(const ElectricalGraph& graph, bool add_self_loops);

// D^(-1) A over the edge weights (no self-loops); every non-isolated row sums
// to 1, rows of isolated nodes are empty.
Csr row_normalized_adjacency(const ElectricalGraph& graph);

}  // namespace nse::grid

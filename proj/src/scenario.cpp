#include "nse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <map>

#include <json.hpp>

namespace nse::scen {

using grid::Branch;
using grid::BranchKind;
using grid::GridTopology;
using nlohmann::json;

int ObservabilityMask::count() const {
  return static_cast<int>(std::count(observed.begin(), observed.end(), true));
}

namespace {

int target_count(double fraction, int node_count) {
  return static_cast<int>(std::floor(fraction * node_count + 0.5));  // round half up
}

}  // namespace

ObservabilityMask sample_observability_mask(int node_count, double fraction, uint64_t seed,
                                            int slack_node) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ValidationError("observability fraction must be in [0,1]");
  if (node_count < 0) throw ValidationError("node_count must be non-negative");

  ObservabilityMask mask;
  mask.fraction = fraction;
  mask.slack_node = slack_node;
  mask.observed.assign(node_count, false);

  const int k = target_count(fraction, node_count);
  if (k == 0) return mask;

  Rng rng(seed);
  if (slack_node >= 0) {
    mask.observed[slack_node] = true;
    std::vector<int> others;
    others.reserve(node_count - 1);
    for (int i = 0; i < node_count; ++i)
      if (i != slack_node) others.push_back(i);
    rng.shuffle(others);
    for (int i = 0; i < k - 1; ++i) mask.observed[others[i]] = true;
  } else {
    for (int i : rng.sample_without_replacement(node_count, k)) mask.observed[i] = true;
  }
  return mask;
}

ObservabilityMask degrade_observability(const ObservabilityMask& mask, double level,
                                        uint64_t seed) {
  if (level < 0.0 || level > mask.fraction + 1e-12)
    throw ValidationError("degradation level must be in [0, mask.fraction]");

  const int n = static_cast<int>(mask.observed.size());
  const int k = target_count(level, n);

  ObservabilityMask out;
  out.fraction = level;
  out.slack_node = mask.slack_node;
  out.observed.assign(n, false);
  if (k == 0) return out;

  const bool keep_slack = mask.slack_node >= 0 && mask.observed[mask.slack_node];
  std::vector<int> pool;
  for (int i = 0; i < n; ++i)
    if (mask.observed[i] && !(keep_slack && i == mask.slack_node)) pool.push_back(i);

  Rng rng(seed);
  rng.shuffle(pool);
  int keep = k;
  if (keep_slack) {
    out.observed[mask.slack_node] = true;
    --keep;
  }
  if (keep > static_cast<int>(pool.size()))
    throw ValidationError("mask has fewer observed nodes than the requested level");
  for (int i = 0; i < keep; ++i) out.observed[pool[i]] = true;
  return out;
}

namespace {

bool branch_active(const Branch& b) {
  if (!b.in_service) return false;
  if (b.kind == BranchKind::Switch && !b.closed) return false;
  return true;
}

// BFS over the active topology; returns hop distance from start per bus id,
// and predecessors branch ids for path recovery.
struct BfsResult {
  std::map<int, int> depth;
  std::map<int, int> pred_bus;
  std::map<int, int> pred_branch;
};

BfsResult bfs_active(const GridTopology& topo, int start) {
  std::map<int, std::vector<std::pair<int, int>>> adj;  // bus -> (neighbor, branch id)
  std::map<int, const Branch*> branch_by_id;
  for (const auto& br : topo.branches) {
    branch_by_id[br.id] = &br;
    if (!branch_active(br)) continue;
    adj[br.from_bus].push_back({br.to_bus, br.id});
    adj[br.to_bus].push_back({br.from_bus, br.id});
  }
  // Deterministic neighbor ordering.
  for (auto& [bus, nbrs] : adj) std::sort(nbrs.begin(), nbrs.end());

  BfsResult res;
  res.depth[start] = 0;
  std::deque<int> queue{start};
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (const auto& [v, br] : adj[u]) {
      if (res.depth.count(v)) continue;
      res.depth[v] = res.depth[u] + 1;
      res.pred_bus[v] = u;
      res.pred_branch[v] = br;
      queue.push_back(v);
    }
  }
  return res;
}

}  // namespace

std::vector<TopologyVariant> make_topology_variants(const GridTopology& topo,
                                                    const std::string& base_topology_id) {
  grid::validate(topo);
  const int slack = topo.slack_bus_id();
  const BfsResult from_slack = bfs_active(topo, slack);

  std::vector<TopologyVariant> variants;
  for (const auto& sw : topo.branches) {
    if (sw.kind != BranchKind::Switch || sw.closed || !sw.in_service) continue;

    // Path between the switch endpoints in the active grid; disabling a line
    // on it is exactly the fault this switch can heal.
    const BfsResult path_bfs = bfs_active(topo, sw.from_bus);
    if (!path_bfs.depth.count(sw.to_bus)) {
      std::cerr << "warning: open switch " << sw.id << " spans disconnected parts; skipped\n";
      continue;
    }
    int best_line = -1, best_depth = -1;
    for (int b = sw.to_bus; b != sw.from_bus; b = path_bfs.pred_bus.at(b)) {
      const Branch* br = topo.find_branch(path_bfs.pred_branch.at(b));
      if (br->kind != BranchKind::Line) continue;
      const int d = std::max(from_slack.depth.at(br->from_bus), from_slack.depth.at(br->to_bus));
      if (d > best_depth || (d == best_depth && br->id < best_line)) {
        best_depth = d;
        best_line = br->id;
      }
    }
    if (best_line < 0) {
      std::cerr << "warning: no line on the loop of switch " << sw.id << "; skipped\n";
      continue;
    }

    TopologyVariant var;
    var.base_topology_id = base_topology_id;
    var.disabled_line_id = best_line;
    var.closed_switch_id = sw.id;
    var.variant_id = "variant_" + std::to_string(sw.id);
    var.variant_topology = topo;
    for (auto& br : var.variant_topology.branches) {
      if (br.id == best_line) br.in_service = false;
      if (br.id == sw.id) br.closed = true;
    }
    try {
      grid::validate(var.variant_topology);
    } catch (const ValidationError& e) {
      std::cerr << "warning: closing switch " << sw.id
                << " cannot restore connectivity; skipped (" << e.what() << ")\n";
      continue;
    }
    variants.push_back(std::move(var));
  }
  return variants;
}

std::pair<std::vector<TopologyVariant>, std::vector<TopologyVariant>> split_variants(
    const std::vector<TopologyVariant>& variants, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must be in (0,1)");
  const int n = static_cast<int>(variants.size());
  if (n < 2) throw ValidationError("need at least 2 variants to split");

  int n_train = static_cast<int>(std::floor(ratio * n + 0.5));
  n_train = std::clamp(n_train, 1, n - 1);

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::pair<std::vector<TopologyVariant>, std::vector<TopologyVariant>> out;
  for (int i = 0; i < n; ++i)
    (i < n_train ? out.first : out.second).push_back(variants[order[i]]);
  return out;
}

std::string variants_to_json(const std::vector<TopologyVariant>& variants) {
  json arr = json::array();
  for (const auto& v : variants)
    arr.push_back({{"variant_id", v.variant_id},
                   {"disabled_line_id", v.disabled_line_id},
                   {"closed_switch_id", v.closed_switch_id}});
  return arr.dump(2) + "\n";
}

std::vector<TopologyVariant> variants_from_json(const std::string& text,
                                                const GridTopology& base,
                                                const std::string& base_topology_id) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed variant manifest: ") + e.what());
  }
  std::vector<TopologyVariant> variants;
  for (const auto& jv : arr) {
    TopologyVariant var;
    var.base_topology_id = base_topology_id;
    var.variant_id = jv.at("variant_id").get<std::string>();
    var.disabled_line_id = jv.at("disabled_line_id").get<int>();
    var.closed_switch_id = jv.at("closed_switch_id").get<int>();
    var.variant_topology = base;
    bool found_line = false, found_switch = false;
    for (auto& br : var.variant_topology.branches) {
      if (br.id == var.disabled_line_id) {
        br.in_service = false;
        found_line = true;
      }
      if (br.id == var.closed_switch_id) {
        br.closed = true;
        found_switch = true;
      }
    }
    if (!found_line || !found_switch)
      throw ValidationError("variant manifest references unknown branches");
    grid::validate(var.variant_topology);
    variants.push_back(std::move(var));
  }
  return variants;
}

}  // namespace nse::scen

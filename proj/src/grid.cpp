#include "nse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace nse::grid {

using nlohmann::json;

const Bus* GridTopology::find_bus(int id) const {
  for (const auto& b : buses)
    if (b.id == id) return &b;
  return nullptr;
}

const Branch* GridTopology::find_branch(int id) const {
  for (const auto& b : branches)
    if (b.id == id) return &b;
  return nullptr;
}

int GridTopology::slack_bus_id() const {
  for (const auto& b : buses)
    if (b.kind == BusKind::Slack) return b.id;
  throw ValidationError("topology has no slack bus");
}

namespace {

// A branch participates in the electrical topology unless it is out of
// service or an open switch.
bool branch_active(const Branch& b) {
  if (!b.in_service) return false;
  if (b.kind == BranchKind::Switch && !b.closed) return false;
  return true;
}

void check_connected(const GridTopology& topo) {
  if (topo.buses.empty()) throw ValidationError("topology has no buses");
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& br : topo.branches) {
    if (!branch_active(br)) continue;
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::unordered_set<int> seen;
  std::deque<int> queue{topo.buses.front().id};
  seen.insert(topo.buses.front().id);
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : adj[u])
      if (seen.insert(v).second) queue.push_back(v);
  }
  if (seen.size() != topo.buses.size())
    throw ValidationError("topology is disconnected over in-service, non-open branches");
}

}  // namespace

void validate(const GridTopology& topo) {
  std::unordered_set<int> bus_ids;
  int slack_count = 0;
  for (const auto& b : topo.buses) {
    if (!bus_ids.insert(b.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (!(b.nominal_kv > 0.0))
      throw ValidationError("bus " + std::to_string(b.id) + " has non-positive nominal_kv");
    if (b.kind == BusKind::Slack) ++slack_count;
  }
  if (slack_count != 1)
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(slack_count));

  std::unordered_set<int> branch_ids;
  for (const auto& br : topo.branches) {
    if (!branch_ids.insert(br.id).second)
      throw ValidationError("duplicate branch id " + std::to_string(br.id));
    if (br.from_bus == br.to_bus)
      throw ValidationError("branch " + std::to_string(br.id) + " connects a bus to itself");
    if (!bus_ids.count(br.from_bus) || !bus_ids.count(br.to_bus))
      throw ValidationError("branch " + std::to_string(br.id) + " references an unknown bus");
    if (br.kind == BranchKind::Line) {
      if (br.r_ohm < 0.0 || br.x_ohm < 0.0)
        throw ValidationError("line " + std::to_string(br.id) + " has negative impedance");
      if (br.r_ohm + br.x_ohm <= 0.0)
        throw ValidationError("line " + std::to_string(br.id) + " has zero impedance");
    }
  }
  check_connected(topo);
}

namespace {

BusKind parse_bus_kind(const std::string& s) {
  if (s == "slack") return BusKind::Slack;
  if (s == "load") return BusKind::Load;
  throw ParseError("unknown bus kind '" + s + "'");
}

BranchKind parse_branch_kind(const std::string& s) {
  if (s == "line") return BranchKind::Line;
  if (s == "transformer") return BranchKind::Transformer;
  if (s == "switch") return BranchKind::Switch;
  throw ParseError("unknown branch kind '" + s + "'");
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ParseError("unknown key '" + it.key() + "' in " + where);
}

double number_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError("missing '" + key + "' in " + where);
  if (!obj[key].is_number()) throw ParseError("'" + key + "' in " + where + " must be a number");
  return obj[key].get<double>();
}

}  // namespace

GridTopology parse_grid(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed grid file: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("grid file root must be an object");
  reject_unknown_keys(root, {"buses", "branches"}, "grid file");
  if (!root.contains("buses") || !root.contains("branches"))
    throw ParseError("grid file must contain 'buses' and 'branches'");

  GridTopology topo;
  for (const auto& jb : root["buses"]) {
    if (!jb.is_object()) throw ParseError("bus entries must be objects");
    reject_unknown_keys(jb, {"id", "nominal_kv", "kind"}, "bus entry");
    Bus b;
    b.id = static_cast<int>(number_field(jb, "id", "bus entry"));
    b.nominal_kv = number_field(jb, "nominal_kv", "bus entry");
    if (!jb.contains("kind")) throw ParseError("missing 'kind' in bus entry");
    b.kind = parse_bus_kind(jb["kind"].get<std::string>());
    topo.buses.push_back(b);
  }
  for (const auto& jb : root["branches"]) {
    if (!jb.is_object()) throw ParseError("branch entries must be objects");
    reject_unknown_keys(jb, {"id", "from", "to", "kind", "r_ohm", "x_ohm", "closed", "in_service"},
                        "branch entry");
    Branch br;
    br.id = static_cast<int>(number_field(jb, "id", "branch entry"));
    br.from_bus = static_cast<int>(number_field(jb, "from", "branch entry"));
    br.to_bus = static_cast<int>(number_field(jb, "to", "branch entry"));
    if (!jb.contains("kind")) throw ParseError("missing 'kind' in branch entry");
    br.kind = parse_branch_kind(jb["kind"].get<std::string>());
    const std::string where = "branch " + std::to_string(br.id);
    if (br.kind == BranchKind::Line) {
      br.r_ohm = number_field(jb, "r_ohm", where);
      br.x_ohm = number_field(jb, "x_ohm", where);
      if (jb.contains("closed")) throw ParseError("'closed' is only valid on switches (" + where + ")");
    } else if (br.kind == BranchKind::Switch) {
      if (jb.contains("r_ohm") || jb.contains("x_ohm"))
        throw ParseError("switches carry no impedance fields (" + where + ")");
      if (!jb.contains("closed")) throw ParseError("missing 'closed' in " + where);
      br.closed = jb["closed"].get<bool>();
    } else {
      if (jb.contains("r_ohm") || jb.contains("x_ohm") || jb.contains("closed"))
        throw ParseError("transformers carry no impedance or switch fields (" + where + ")");
    }
    if (jb.contains("in_service")) br.in_service = jb["in_service"].get<bool>();
    topo.branches.push_back(br);
  }
  validate(topo);
  return topo;
}

GridTopology load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open grid file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

std::string grid_to_json(const GridTopology& topo) {
  json root;
  root["buses"] = json::array();
  for (const auto& b : topo.buses) {
    root["buses"].push_back({{"id", b.id},
                             {"nominal_kv", b.nominal_kv},
                             {"kind", b.kind == BusKind::Slack ? "slack" : "load"}});
  }
  root["branches"] = json::array();
  for (const auto& br : topo.branches) {
    json jb{{"id", br.id}, {"from", br.from_bus}, {"to", br.to_bus}};
    switch (br.kind) {
      case BranchKind::Line:
        jb["kind"] = "line";
        jb["r_ohm"] = br.r_ohm;
        jb["x_ohm"] = br.x_ohm;
        break;
      case BranchKind::Transformer:
        jb["kind"] = "transformer";
        break;
      case BranchKind::Switch:
        jb["kind"] = "switch";
        jb["closed"] = br.closed;
        break;
    }
    jb["in_service"] = br.in_service;
    root["branches"].push_back(std::move(jb));
  }
  return root.dump(2) + "\n";
}

FusionResult fuse_switch_buses(const GridTopology& topo) {
  // Auxiliary graph: buses as nodes, closed in-service bus-to-bus switches as edges.
  std::map<int, std::vector<int>> aux;  // multi-edges kept
  for (const auto& br : topo.branches) {
    if (br.kind != BranchKind::Switch || !br.closed || !br.in_service) continue;
    aux[br.from_bus].push_back(br.to_bus);
    aux[br.to_bus].push_back(br.from_bus);
  }

  std::map<int, int> fused_into;  // removed bus -> bus it was fused with
  auto chase = [&](int b) {
    auto it = fused_into.find(b);
    while (it != fused_into.end()) {
      b = it->second;
      it = fused_into.find(b);
    }
    return b;
  };

  std::map<int, int> degree;
  for (const auto& [bus, nbrs] : aux) degree[bus] = static_cast<int>(nbrs.size());

  // Peel degree-one nodes, fusing each into its surviving neighbor. Removing
  // a node lowers the neighbor's degree, which may queue it in turn.
  std::set<int> removed;
  std::deque<int> ones;
  for (const auto& [bus, d] : degree)
    if (d == 1) ones.push_back(bus);
  while (!ones.empty()) {
    int b = ones.front();
    ones.pop_front();
    if (removed.count(b) || degree[b] != 1) continue;
    int nb = -1;
    for (int cand : aux[b])
      if (!removed.count(cand)) {
        nb = cand;
        break;
      }
    fused_into[b] = nb;
    removed.insert(b);
    if (--degree[nb] == 1) ones.push_back(nb);
  }

  // Switch cycles survive peeling with degree two everywhere; collapse what
  // is left component-wise so groups always equal aux-graph components.
  for (const auto& [bus, nbrs] : aux) {
    if (removed.count(bus)) continue;
    for (int nb : nbrs) {
      if (removed.count(nb)) continue;
      int a = chase(bus), b = chase(nb);
      if (a != b) fused_into[std::max(a, b)] = std::min(a, b);
    }
  }

  std::map<int, std::vector<int>> members;  // keyed by chase root
  for (const auto& [bus, nbrs] : aux) members[chase(bus)].push_back(bus);

  FusionResult res;
  std::map<int, int> group_rep;  // any member -> min member id
  for (auto& [root, group] : members) {
    std::sort(group.begin(), group.end());
    for (int b : group) group_rep[b] = group.front();
    res.groups.push_back(group);
  }
  std::sort(res.groups.begin(), res.groups.end());

  // Node indexing: dense rank over sorted representative ids (min bus id of
  // each group, the bus itself otherwise).
  std::set<int> reps;
  std::map<int, int> rep_of;
  for (const auto& b : topo.buses) {
    auto it = group_rep.find(b.id);
    int rep = it == group_rep.end() ? b.id : it->second;
    rep_of[b.id] = rep;
    reps.insert(rep);
  }
  std::map<int, int> rep_index;
  int next = 0;
  for (int r : reps) rep_index[r] = next++;
  for (const auto& [bus, rep] : rep_of) res.bus_to_node[bus] = rep_index[rep];
  res.node_count = next;
  return res;
}

ElectricalGraph build_electrical_graph(const GridTopology& topo, bool use_admittance) {
  validate(topo);
  FusionResult fusion = fuse_switch_buses(topo);

  // Median line admittance magnitude over in-service lines, used for
  // transformer edges in weighted mode.
  std::vector<double> line_adm;
  for (const auto& br : topo.branches)
    if (br.kind == BranchKind::Line && br.in_service)
      line_adm.push_back(1.0 / std::abs(std::complex<double>(br.r_ohm, br.x_ohm)));
  double median_adm = 1.0;
  if (!line_adm.empty()) {
    std::sort(line_adm.begin(), line_adm.end());
    const size_t n = line_adm.size();
    median_adm = (n % 2 == 1) ? line_adm[n / 2] : 0.5 * (line_adm[n / 2 - 1] + line_adm[n / 2]);
  }

  std::map<std::pair<int, int>, double> merged;
  for (const auto& br : topo.branches) {
    if (!br.in_service || br.kind == BranchKind::Switch) continue;
    int u = fusion.bus_to_node.at(br.from_bus);
    int v = fusion.bus_to_node.at(br.to_bus);
    if (u == v) continue;  // collapsed into one node by fusion
    if (u > v) std::swap(u, v);
    double w = 1.0;
    if (br.kind == BranchKind::Line) {
      const double zmag = std::abs(std::complex<double>(br.r_ohm, br.x_ohm));
      if (!(zmag > 0.0))
        throw ValidationError("line " + std::to_string(br.id) + " has zero impedance");
      if (use_admittance) w = 1.0 / zmag;
    } else if (use_admittance) {
      w = median_adm;
    }
    merged[{u, v}] += w;  // parallel admittances add
  }

  ElectricalGraph g;
  g.node_count = fusion.node_count;
  g.bus_to_node = fusion.bus_to_node;
  g.slack_node = fusion.bus_to_node.at(topo.slack_bus_id());
  for (const auto& [uv, w] : merged) {
    if (!std::isfinite(w) || !(w > 0.0))
      throw ValidationError("non-finite or non-positive edge weight after merging");
    g.edges.push_back({uv.first, uv.second, w});
  }

  // Fused graph must stay connected.
  std::vector<std::vector<int>> adj(g.node_count);
  for (const auto& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<char> seen(g.node_count, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int count = g.node_count ? 1 : 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        queue.push_back(v);
      }
  }
  if (count != g.node_count)
    throw ValidationError("electrical graph is disconnected after fusion");
  return g;
}

Csr normalized_adjacency(const ElectricalGraph& graph, bool add_self_loops) {
  const int n = graph.node_count;
  std::vector<double> degree(n, 0.0);
  for (const auto& e : graph.edges) {
    degree[e.u] += e.weight;
    degree[e.v] += e.weight;
  }
  if (add_self_loops)
    for (int i = 0; i < n; ++i) degree[i] += 1.0;
  for (int i = 0; i < n; ++i)
    if (!(degree[i] > 0.0))
      throw ValidationError("node " + std::to_string(i) +
                            " is isolated; normalized adjacency undefined");

  std::vector<double> dinv(n);
  for (int i = 0; i < n; ++i) dinv[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (const auto& e : graph.edges) {
    const double w = e.weight * dinv[e.u] * dinv[e.v];
    rows[e.u].push_back({e.v, w});
    rows[e.v].push_back({e.u, w});
  }
  if (add_self_loops)
    for (int i = 0; i < n; ++i) rows[i].push_back({i, dinv[i] * dinv[i]});

  Csr m;
  m.rows = m.cols = n;
  m.ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    m.ptr[i + 1] = m.ptr[i] + static_cast<int>(rows[i].size());
    for (const auto& [j, w] : rows[i]) {
      m.idx.push_back(j);
      m.val.push_back(w);
    }
  }
  return m;
}

Csr row_normalized_adjacency(const ElectricalGraph& graph) {
  const int n = graph.node_count;
  std::vector<double> degree(n, 0.0);
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (const auto& e : graph.edges) {
    degree[e.u] += e.weight;
    degree[e.v] += e.weight;
    rows[e.u].push_back({e.v, e.weight});
    rows[e.v].push_back({e.u, e.weight});
  }

  Csr m;
  m.rows = m.cols = n;
  m.ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    m.ptr[i + 1] = m.ptr[i] + static_cast<int>(rows[i].size());
    for (const auto& [j, w] : rows[i]) {
      m.idx.push_back(j);
      m.val.push_back(w / degree[i]);
    }
  }
  return m;
}

}  // namespace nse::grid

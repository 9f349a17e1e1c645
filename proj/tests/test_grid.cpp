#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <string>

#include "nse/grid.hpp"
#include "testutil.hpp"

using namespace nse;
using namespace nse::grid;

namespace {

const char* kTwoBus = R"({
  "buses": [
    {"id": 1, "nominal_kv": 10.0, "kind": "slack"},
    {"id": 2, "nominal_kv": 10.0, "kind": "load"}
  ],
  "branches": [
    {"id": 10, "from": 1, "to": 2, "kind": "line", "r_ohm": 3.0, "x_ohm": 4.0}
  ]
})";

// Buses 1..n in a line of closed switches, bus 1 slack, plus a real line so
// the graph has an edge after fusion.
GridTopology switch_chain(int n) {
  GridTopology topo;
  for (int i = 1; i <= n; ++i)
    topo.buses.push_back({i, 10.0, i == 1 ? BusKind::Slack : BusKind::Load});
  topo.buses.push_back({n + 1, 10.0, BusKind::Load});
  for (int i = 1; i < n; ++i) {
    Branch sw;
    sw.id = 100 + i;
    sw.from_bus = i;
    sw.to_bus = i + 1;
    sw.kind = BranchKind::Switch;
    sw.closed = true;
    topo.branches.push_back(sw);
  }
  Branch line;
  line.id = 200;
  line.from_bus = n;
  line.to_bus = n + 1;
  line.kind = BranchKind::Line;
  line.r_ohm = 1.0;
  line.x_ohm = 1.0;
  topo.branches.push_back(line);
  return topo;
}

Eigen::MatrixXd csr_to_dense(const Csr& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int p = m.ptr[r]; p < m.ptr[r + 1]; ++p) out(r, m.idx[p]) += m.val[p];
  return out;
}

double edge_weight(const ElectricalGraph& g, int u, int v) {
  for (const auto& e : g.edges)
    if ((e.u == u && e.v == v) || (e.u == v && e.v == u)) return e.weight;
  return -1.0;
}

}  // namespace

TEST_CASE("minimal two-bus grid parses") {
  const GridTopology topo = parse_grid(kTwoBus);
  CHECK(topo.buses.size() == 2);
  CHECK(topo.branches.size() == 1);
  CHECK(topo.slack_bus_id() == 1);
  CHECK(topo.find_bus(2)->kind == BusKind::Load);
  CHECK(topo.find_branch(10)->r_ohm == 3.0);
}

TEST_CASE("parse and validation errors") {
  SUBCASE("branch referencing unknown bus") {
    std::string text = kTwoBus;
    const auto pos = text.find("\"to\": 2");
    text.replace(pos, 7, "\"to\": 99");
    CHECK_THROWS_AS(parse_grid(text), ValidationError);
  }
  SUBCASE("unknown key rejected") {
    std::string text = kTwoBus;
    text.replace(text.find("\"r_ohm\""), 7, "\"resistance\"");
    CHECK_THROWS_AS(parse_grid(text), ParseError);
  }
  SUBCASE("malformed text") { CHECK_THROWS_AS(parse_grid("{"), ParseError); }
  SUBCASE("no slack bus") {
    std::string text = kTwoBus;
    text.replace(text.find("\"slack\""), 7, "\"load\"");
    CHECK_THROWS_AS(parse_grid(text), ValidationError);
  }
  SUBCASE("zero-impedance line") {
    std::string text = kTwoBus;
    text.replace(text.find("\"r_ohm\": 3.0"), 12, "\"r_ohm\": 0.0");
    text.replace(text.find("\"x_ohm\": 4.0"), 12, "\"x_ohm\": 0.0");
    CHECK_THROWS_AS(parse_grid(text), ValidationError);
  }
  SUBCASE("disconnected grid") {
    // Drop the only branch: bus 2 ends up unreachable.
    std::string text = kTwoBus;
    const auto lb = text.find('[', text.find("branches"));
    const auto rb = text.find(']', lb);
    text.replace(lb, rb - lb + 1, "[]");
    CHECK_THROWS_AS(parse_grid(text), ValidationError);
  }
}

TEST_CASE("grid json round-trip is stable") {
  const GridTopology topo = load_grid(tu::data_path("grids/feeder30.json"));
  const std::string once = grid_to_json(topo);
  CHECK(grid_to_json(parse_grid(once)) == once);
}

TEST_CASE("bundled grid fixtures") {
  SUBCASE("30-bus feeder") {
    const GridTopology topo = load_grid(tu::data_path("grids/feeder30.json"));
    CHECK(topo.buses.size() == 30);
    int lines = 0, switches = 0, closed = 0;
    for (const auto& br : topo.branches) {
      lines += br.kind == BranchKind::Line;
      switches += br.kind == BranchKind::Switch;
      closed += br.kind == BranchKind::Switch && br.closed;
    }
    CHECK(lines == 29);
    CHECK(switches == 4);
    CHECK(closed == 0);  // loop switches are normally open
  }
  SUBCASE("15-bus feeder") {
    const GridTopology topo = load_grid(tu::data_path("grids/feeder15.json"));
    CHECK(topo.buses.size() == 15);
    const ElectricalGraph g = build_electrical_graph(topo, true);
    CHECK(g.node_count == 15);
  }
}

TEST_CASE("switch fusion collapses closed components") {
  SUBCASE("chain of three buses") {
    const FusionResult fr = fuse_switch_buses(switch_chain(3));
    REQUIRE(fr.groups.size() == 1);
    CHECK(fr.groups[0] == std::vector<int>{1, 2, 3});
    CHECK(fr.bus_to_node.at(1) == fr.bus_to_node.at(2));
    CHECK(fr.bus_to_node.at(2) == fr.bus_to_node.at(3));
    CHECK(fr.node_count == 2);  // fused group + the line-only bus
  }
  SUBCASE("star of closed switches") {
    // Center bus 1 with switches to 2, 3, 4; peeling leaves must still merge
    // everything into one node.
    GridTopology topo;
    for (int i = 1; i <= 5; ++i)
      topo.buses.push_back({i, 10.0, i == 1 ? BusKind::Slack : BusKind::Load});
    for (int leaf = 2; leaf <= 4; ++leaf) {
      Branch sw;
      sw.id = 100 + leaf;
      sw.from_bus = 1;
      sw.to_bus = leaf;
      sw.kind = BranchKind::Switch;
      sw.closed = true;
      topo.branches.push_back(sw);
    }
    Branch line;
    line.id = 200;
    line.from_bus = 4;
    line.to_bus = 5;
    line.kind = BranchKind::Line;
    line.r_ohm = 1.0;
    line.x_ohm = 0.0;
    topo.branches.push_back(line);

    const FusionResult fr = fuse_switch_buses(topo);
    REQUIRE(fr.groups.size() == 1);
    CHECK(fr.groups[0] == std::vector<int>{1, 2, 3, 4});
    const ElectricalGraph g = build_electrical_graph(topo, true);
    CHECK(g.node_count == 2);
  }
  SUBCASE("two pairs and an open switch") {
    GridTopology topo;
    for (int i = 1; i <= 4; ++i)
      topo.buses.push_back({i, 10.0, i == 1 ? BusKind::Slack : BusKind::Load});
    auto add_switch = [&](int id, int a, int b, bool is_closed) {
      Branch sw;
      sw.id = id;
      sw.from_bus = a;
      sw.to_bus = b;
      sw.kind = BranchKind::Switch;
      sw.closed = is_closed;
      topo.branches.push_back(sw);
    };
    add_switch(101, 1, 2, true);
    add_switch(102, 3, 4, true);
    add_switch(103, 2, 3, false);  // open: must not merge the pairs
    Branch line;
    line.id = 200;
    line.from_bus = 2;
    line.to_bus = 3;
    line.kind = BranchKind::Line;
    line.r_ohm = 0.5;
    line.x_ohm = 0.5;
    topo.branches.push_back(line);

    const FusionResult fr = fuse_switch_buses(topo);
    REQUIRE(fr.groups.size() == 2);
    std::set<std::vector<int>> groups(fr.groups.begin(), fr.groups.end());
    CHECK(groups.count({1, 2}) == 1);
    CHECK(groups.count({3, 4}) == 1);
    CHECK(fr.bus_to_node.at(1) != fr.bus_to_node.at(3));
  }
  SUBCASE("no closed switches is the identity") {
    const GridTopology topo = load_grid(tu::data_path("grids/feeder30.json"));
    const FusionResult fr = fuse_switch_buses(topo);
    CHECK(fr.groups.empty());
    CHECK(fr.node_count == 30);
    std::set<int> nodes;
    for (const auto& [bus, node] : fr.bus_to_node) nodes.insert(node);
    CHECK(nodes.size() == 30);
  }
}

TEST_CASE("fusion groups equal union-find components") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + rng.uniform_int(20);
    const GridTopology topo = tu::random_switch_topology(rng, n, 2 + rng.uniform_int(12));
    const FusionResult fr = fuse_switch_buses(topo);

    tu::UnionFind uf(n + 1);  // bus ids are 1-based
    for (const auto& br : topo.branches)
      if (br.kind == BranchKind::Switch && br.closed && br.in_service)
        uf.unite(br.from_bus, br.to_bus);

    for (int a = 1; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b) {
        const bool same_component = uf.find(a) == uf.find(b);
        const bool same_node = fr.bus_to_node.at(a) == fr.bus_to_node.at(b);
        CAPTURE(trial);
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(same_component == same_node);
      }
  }
}

TEST_CASE("electrical graph weights") {
  SUBCASE("admittance magnitude of one line") {
    const GridTopology topo = parse_grid(kTwoBus);  // r=3, x=4 -> |z|=5
    const ElectricalGraph g = build_electrical_graph(topo, true);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == doctest::Approx(0.2));
    CHECK(g.slack_node == g.bus_to_node.at(1));
  }
  SUBCASE("unweighted graph uses unit weights") {
    const ElectricalGraph g = build_electrical_graph(parse_grid(kTwoBus), false);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == 1.0);
  }
  SUBCASE("parallel lines merge by admittance sum") {
    GridTopology topo = parse_grid(kTwoBus);
    Branch second;
    second.id = 11;
    second.from_bus = 1;
    second.to_bus = 2;
    second.kind = BranchKind::Line;
    // |z| = 10/3 -> admittance 0.3; together with 0.2 the pair merges to 0.5
    second.r_ohm = 2.0;
    second.x_ohm = 8.0 / 3.0;
    topo.branches.push_back(second);
    validate(topo);
    const ElectricalGraph g = build_electrical_graph(topo, true);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == doctest::Approx(0.5));
  }
  SUBCASE("transformer takes the median line admittance") {
    GridTopology topo = parse_grid(kTwoBus);
    topo.buses.push_back({3, 0.4, BusKind::Load});
    Branch xfmr;
    xfmr.id = 12;
    xfmr.from_bus = 2;
    xfmr.to_bus = 3;
    xfmr.kind = BranchKind::Transformer;
    topo.branches.push_back(xfmr);
    validate(topo);
    const ElectricalGraph g = build_electrical_graph(topo, true);
    CHECK(edge_weight(g, g.bus_to_node.at(2), g.bus_to_node.at(3)) ==
          doctest::Approx(0.2));  // only line has admittance 0.2
    const ElectricalGraph unweighted = build_electrical_graph(topo, false);
    CHECK(edge_weight(unweighted, unweighted.bus_to_node.at(2),
                      unweighted.bus_to_node.at(3)) == 1.0);
  }
  SUBCASE("closed switches never survive as edges") {
    const ElectricalGraph g = build_electrical_graph(switch_chain(3), true);
    CHECK(g.node_count == 2);
    REQUIRE(g.edges.size() == 1);
    CHECK(std::isfinite(g.edges[0].weight));
    CHECK(g.edges[0].weight > 0.0);
  }
  SUBCASE("out-of-service lines are dropped") {
    GridTopology topo = parse_grid(kTwoBus);
    Branch second;
    second.id = 11;
    second.from_bus = 1;
    second.to_bus = 2;
    second.kind = BranchKind::Line;
    second.r_ohm = 1.0;
    second.x_ohm = 0.0;
    second.in_service = false;
    topo.branches.push_back(second);
    validate(topo);
    const ElectricalGraph g = build_electrical_graph(topo, true);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == doctest::Approx(0.2));
  }
}

TEST_CASE("normalized adjacency") {
  SUBCASE("single node with self-loop is identity") {
    GridTopology topo;
    topo.buses.push_back({1, 10.0, BusKind::Slack});
    const ElectricalGraph g = build_electrical_graph(topo, true);
    const Csr a = normalized_adjacency(g, true);
    REQUIRE(a.rows == 1);
    CHECK(csr_to_dense(a)(0, 0) == doctest::Approx(1.0));
    // Without a self-loop the node is isolated: zero degree is an error.
    CHECK_THROWS_AS(normalized_adjacency(g, false), ValidationError);
  }
  SUBCASE("two nodes, unit edge, no self-loops") {
    const ElectricalGraph g = build_electrical_graph(parse_grid(kTwoBus), false);
    const Eigen::MatrixXd a = csr_to_dense(normalized_adjacency(g, false));
    CHECK(a(0, 1) == doctest::Approx(1.0));
    CHECK(a(1, 0) == doctest::Approx(1.0));
    CHECK(a(0, 0) == 0.0);
  }
  SUBCASE("matches the dense construction on random graphs") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
      const ElectricalGraph g = tu::random_graph(rng, 3 + rng.uniform_int(40));
      for (bool self_loops : {false, true}) {
        Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(g.node_count, g.node_count);
        for (const auto& e : g.edges) adj(e.u, e.v) = adj(e.v, e.u) = e.weight;
        if (self_loops) adj += Eigen::MatrixXd::Identity(g.node_count, g.node_count);
        const Eigen::VectorXd dinv_sqrt = adj.rowwise().sum().cwiseInverse().cwiseSqrt();
        const Eigen::MatrixXd expect =
            dinv_sqrt.asDiagonal() * adj * dinv_sqrt.asDiagonal();

        const Eigen::MatrixXd got = csr_to_dense(normalized_adjacency(g, self_loops));
        CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);

        // Spectral radius stays at most 1 (power iteration).
        Eigen::VectorXd v = Eigen::VectorXd::Ones(g.node_count);
        for (int it = 0; it < 200; ++it) v = (got * v).normalized();
        CHECK(std::abs((got * v).norm()) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("row-normalized adjacency rows sum to one") {
  Rng rng(13);
  const ElectricalGraph g = tu::random_graph(rng, 17);
  const Eigen::MatrixXd p = csr_to_dense(row_normalized_adjacency(g));
  for (int r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
  CHECK(p.diagonal().cwiseAbs().maxCoeff() == 0.0);  // no self-loops
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nse/feature_prop.hpp"
#include "nse/grid.hpp"
#include "nse/scenario.hpp"
#include "testutil.hpp"

using namespace nse;
using namespace nse::fp;

namespace {

scen::ObservabilityMask mask_of(int n, std::initializer_list<int> observed) {
  scen::ObservabilityMask m;
  m.observed.assign(n, false);
  for (int i : observed) m.observed[i] = true;
  m.fraction = n ? static_cast<double>(m.count()) / n : 0.0;
  return m;
}

grid::ElectricalGraph path3(double w01, double w12) {
  grid::ElectricalGraph g;
  g.node_count = 3;
  g.slack_node = 0;
  for (int i = 0; i < 3; ++i) g.bus_to_node[i + 1] = i;
  g.edges.push_back({0, 1, w01});
  g.edges.push_back({1, 2, w12});
  return g;
}

}  // namespace

TEST_CASE("fully observed input passes through untouched") {
  Rng rng(21);
  const auto g = tu::random_graph(rng, 9);
  const Mat x = tu::random_mat(rng, 9, 3);
  const Mat out = propagate_features(g, x, mask_of(9, {0, 1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(out.data == x.data);  // bit-exact
}

TEST_CASE("observed rows are restored bit-exactly") {
  Rng rng(22);
  const auto g = tu::random_graph(rng, 12);
  const Mat x = tu::random_mat(rng, 12, 2);
  const auto mask = mask_of(12, {0, 3, 7});
  const Mat out = propagate_features(g, x, mask);
  for (int r : {0, 3, 7})
    for (int c = 0; c < 2; ++c) CHECK(out(r, c) == x(r, c));
}

TEST_CASE("single unobserved neighbor adopts the observed value") {
  grid::ElectricalGraph g;
  g.node_count = 2;
  g.slack_node = 0;
  g.bus_to_node[1] = 0;
  g.bus_to_node[2] = 1;
  g.edges.push_back({0, 1, 1.7});
  Mat x(2, 1);
  x(0, 0) = 0.83;
  const Mat out = propagate_features(g, x, mask_of(2, {0}), {1e-12, 10000});
  CHECK(out(1, 0) == doctest::Approx(0.83).epsilon(1e-9));
}

TEST_CASE("midpoint of a unit path averages its ends") {
  Mat x(3, 1);
  x(0, 0) = 0.0;
  x(2, 0) = 1.0;
  const Mat out =
      propagate_features(path3(1.0, 1.0), x, mask_of(3, {0, 2}), {1e-12, 10000});
  CHECK(out(1, 0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("weighted midpoint leans toward the stronger tie") {
  // boundary 0 over a 0.2 edge, boundary 1 over a 0.8 edge:
  // m = (0.2 * 0 + 0.8 * 1) / (0.2 + 0.8) = 0.8
  Mat x(3, 1);
  x(0, 0) = 0.0;
  x(2, 0) = 1.0;
  const Mat out =
      propagate_features(path3(0.2, 0.8), x, mask_of(3, {0, 2}), {1e-12, 10000});
  CHECK(out(1, 0) == doctest::Approx(0.8).epsilon(1e-9));
  const Mat exact = dirichlet_solve_oracle(path3(0.2, 0.8), x, mask_of(3, {0, 2}));
  CHECK(exact(1, 0) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("leaves of a star copy the observed center") {
  grid::ElectricalGraph g;
  g.node_count = 5;
  g.slack_node = 0;
  for (int i = 0; i < 5; ++i) g.bus_to_node[i + 1] = i;
  for (int leaf = 1; leaf < 5; ++leaf) g.edges.push_back({0, leaf, 0.5 + leaf});
  Mat x(5, 2);
  x(0, 0) = 1.02;
  x(0, 1) = -0.04;
  const Mat out = propagate_features(g, x, mask_of(5, {0}), {1e-12, 10000});
  for (int leaf = 1; leaf < 5; ++leaf) {
    CHECK(out(leaf, 0) == doctest::Approx(1.02).epsilon(1e-9));
    CHECK(out(leaf, 1) == doctest::Approx(-0.04).epsilon(1e-9));
  }
}

TEST_CASE("iteration agrees with the exact boundary-value solve") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + rng.uniform_int(10);
    const auto g = tu::random_graph(rng, n);
    const Mat x = tu::random_mat(rng, n, 3);
    auto mask = scen::sample_observability_mask(n, 0.5, rng.next(), 0);
    const Mat fast = propagate_features(g, x, mask, {1e-10, 20000});
    const Mat exact = dirichlet_solve_oracle(g, x, mask);
    CHECK(tu::max_abs_diff(fast, exact) < 1e-5);
  }
}

TEST_CASE("interpolated values respect the maximum principle") {
  Rng rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 6 + rng.uniform_int(8);
    const auto g = tu::random_graph(rng, n);
    const Mat x = tu::random_mat(rng, n, 2);
    const auto mask = scen::sample_observability_mask(n, 0.4, rng.next(), 0);
    const Mat out = propagate_features(g, x, mask);
    for (int c = 0; c < 2; ++c) {
      double lo = 1e300, hi = -1e300;
      for (int r = 0; r < n; ++r) {
        if (!mask.observed[r]) continue;
        lo = std::min(lo, x(r, c));
        hi = std::max(hi, x(r, c));
      }
      for (int r = 0; r < n; ++r) {
        CHECK(out(r, c) >= lo - 1e-9);
        CHECK(out(r, c) <= hi + 1e-9);
      }
    }
  }
}

TEST_CASE("iterates converge monotonically after settling") {
  // Run k sweeps for growing k (tolerance effectively off) and watch the
  // distance to the exact solution shrink.
  Rng rng(25);
  const auto g = tu::random_graph(rng, 12);
  const Mat x = tu::random_mat(rng, 12, 1);
  const auto mask = mask_of(12, {0, 5, 9});
  const Mat exact = dirichlet_solve_oracle(g, x, mask);
  double prev = 1e300;
  for (int k = 2; k <= 1024; k *= 2) {
    const Mat it = propagate_features(g, x, mask, {1e-300, k});
    const double dist = tu::max_abs_diff(it, exact);
    CHECK(dist <= prev + 1e-12);
    prev = dist;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("empty mask yields all zeros") {
  Rng rng(26);
  const auto g = tu::random_graph(rng, 6);
  const Mat x = tu::random_mat(rng, 6, 3);
  const Mat out = propagate_features(g, x, mask_of(6, {}));
  REQUIRE(out.rows == 6);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("nodes cut off from all sensors") {
  // two components: 0-1 observed side, 2-3 unobserved island
  grid::ElectricalGraph g;
  g.node_count = 4;
  g.slack_node = 0;
  for (int i = 0; i < 4; ++i) g.bus_to_node[i + 1] = i;
  g.edges.push_back({0, 1, 1.0});
  g.edges.push_back({2, 3, 1.0});
  Mat x(4, 1);
  x(0, 0) = 2.0;
  x(1, 0) = 4.0;
  const auto mask = mask_of(4, {0, 1});

  SUBCASE("the iterative path parks them at the observed mean") {
    const Mat out = propagate_features(g, x, mask);
    CHECK(out(2, 0) == doctest::Approx(3.0));
    CHECK(out(3, 0) == doctest::Approx(3.0));
  }
  SUBCASE("the exact solve refuses the singular system") {
    CHECK_THROWS_AS(dirichlet_solve_oracle(g, x, mask), NumericError);
  }
}

#include <random>
#include <vector>

#include "doctest.h"

#include "fastot/errors.hpp"
#include "fastot/exact_oracle.hpp"
#include "fastot/measures.hpp"
#include "oracles.hpp"

using namespace fastot;

TEST_CASE("uniform_measure") {
  const auto four = uniform_measure(PointCloud(1, std::vector<double>{0, 1, 2, 3}));
  for (double m : four.masses()) CHECK(m == 0.25);
  const auto one = uniform_measure(PointCloud(2, std::vector<double>{5, 5}));
  CHECK(one.masses()[0] == 1.0);
  std::vector<double> flat(1000);
  const auto big = uniform_measure(PointCloud(1, flat));
  double total = 0.0;
  for (double m : big.masses()) {
    CHECK(m == 0.001);
    total += m;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(uniform_measure(PointCloud(1, std::vector<double>{})), InvalidInput);
}

TEST_CASE("point cloud and measure validation") {
  CHECK_THROWS_AS(PointCloud(0, std::vector<double>{1.0}), InvalidInput);
  CHECK_THROWS_AS(PointCloud(2, std::vector<double>{1.0, 2.0, 3.0}), InvalidInput);
  CHECK_THROWS_AS(PointCloud::from_rows({{1.0, 2.0}, {3.0}}), InvalidInput);
  CHECK_THROWS_AS(PointCloud(1, std::vector<double>{std::nan("")}), InvalidInput);
  const PointCloud c(1, std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(DiscreteMeasure(c, {0.5}), InvalidInput);
  CHECK_THROWS_AS(DiscreteMeasure(c, {-0.1, 1.1}), InvalidInput);
  CHECK_THROWS_AS(DiscreteMeasure(c, {0.5, 0.6}), InvalidInput);
  CHECK_NOTHROW(DiscreteMeasure(c, {0.5, 0.5 + 5e-10}));
  const auto p = PointCloud::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(p.dim() == 3);
  CHECK(p.point(1) == std::vector<double>{4, 5, 6});
}

TEST_CASE("cost_entry") {
  const auto s = PointCloud::from_rows({{0, 0}});
  const auto t = PointCloud::from_rows({{3, 4}, {0, 0}});
  const CostOracle o(s, t);
  CHECK(cost_entry(o, 0, 0) == 25.0);
  CHECK(cost_entry(o, 0, 1) == 0.0);
  const auto a = PointCloud::from_rows({{1}});
  const auto b = PointCloud::from_rows({{-2}});
  CHECK(cost_entry(CostOracle(a, b), 0, 0) == 9.0);
  CHECK_THROWS_AS(cost_entry(o, 1, 0), IndexError);
  CHECK_THROWS_AS(cost_entry(o, 0, 2), IndexError);
  CHECK_THROWS_AS(CostOracle(a, s), InvalidInput);
}

TEST_CASE("cost properties: nonnegative, zero iff coincident, symmetric under swap") {
  std::mt19937_64 rng(3);
  const auto s = testing::integer_cloud(rng, 12, 3, 3);
  const auto t = testing::integer_cloud(rng, 9, 3, 3);
  const CostOracle o(s, t);
  const CostOracle ot = o.transposed();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      CHECK(o(i, j) >= 0.0);
      CHECK((o(i, j) == 0.0) == (s.point(i) == t.point(j)));
      CHECK(o(i, j) == ot(j, i));
    }
  }
}

TEST_CASE("plan_cost") {
  const auto s = PointCloud::from_rows({{0, 0}});
  const auto t = PointCloud::from_rows({{3, 4}});
  CHECK(plan_cost(TransportPlan(1, 1, {{0, 0, 1.0}}), CostOracle(s, t)) == 25.0);
  CHECK_THROWS_AS(TransportPlan(1, 1, {}), InvalidInput);

  const auto a = PointCloud::from_rows({{0}, {0}, {0}});
  const auto b = PointCloud::from_rows({{1}, {2}, {3}});
  const TransportPlan diag(3, 3, {{0, 0, 1.0 / 3}, {1, 1, 1.0 / 3}, {2, 2, 1.0 / 3}});
  CHECK(plan_cost(diag, CostOracle(a, b)) == doctest::Approx(14.0 / 3).epsilon(1e-15));
  CHECK_THROWS_AS(plan_cost(diag, CostOracle(s, t)), InvalidInput);
}

TEST_CASE("plan cost is linear in the masses") {
  const auto a = PointCloud::from_rows({{0}, {1}});
  const auto b = PointCloud::from_rows({{2}, {5}});
  const CostOracle o(a, b);
  std::vector<PlanEntry> e{{0, 0, 0.3}, {0, 1, 0.2}, {1, 1, 0.5}};
  const double base = raw_plan_cost(e, o);
  for (double alpha : {0.0, 0.5, 3.0}) {
    auto scaled = e;
    for (auto& x : scaled) x.mass *= alpha;
    CHECK(raw_plan_cost(scaled, o) == doctest::Approx(alpha * base).epsilon(1e-14));
  }
}

TEST_CASE("plan validation") {
  CHECK_THROWS_AS(TransportPlan(2, 2, {{0, 0, 0.5}, {0, 0, 0.5}}), InvalidInput);
  CHECK_THROWS_AS(TransportPlan(2, 2, {{0, 0, 0.5}, {2, 0, 0.5}}), InvalidInput);
  CHECK_THROWS_AS(TransportPlan(2, 2, {{0, 0, 1.0}, {1, 1, 0.0}}), InvalidInput);
  CHECK_THROWS_AS(TransportPlan(2, 2, {{0, 0, 0.5}, {1, 1, 0.4}}), InvalidInput);
  const TransportPlan p(2, 2, {{1, 1, 0.5}, {0, 0, 0.5}});
  CHECK(p.entries()[0].i == 0);  // sorted
  CHECK(p.total_mass() == 1.0);
  const auto pt = p.transposed();
  CHECK(pt.n_source() == 2);
}

TEST_CASE("marginals") {
  const TransportPlan id(2, 2, {{0, 0, 0.5}, {1, 1, 0.5}});
  auto m = marginals(id);
  CHECK(m.source == std::vector<double>{0.5, 0.5});
  CHECK(m.target == std::vector<double>{0.5, 0.5});

  const TransportPlan p(2, 2, {{0, 0, 0.3}, {0, 1, 0.2}, {1, 1, 0.5}});
  m = marginals(p);
  CHECK(m.source[0] == doctest::Approx(0.5));
  CHECK(m.source[1] == doctest::Approx(0.5));
  CHECK(m.target[0] == doctest::Approx(0.3));
  CHECK(m.target[1] == doctest::Approx(0.7));
}

TEST_CASE("marginals of exact plans reproduce the measures") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ns = 2 + rng() % 7;
    const std::size_t nt = 2 + rng() % 7;
    const DiscreteMeasure mu_s(testing::real_cloud(rng, ns), testing::random_masses(rng, ns));
    const DiscreteMeasure mu_t(testing::real_cloud(rng, nt), testing::random_masses(rng, nt));
    const auto sol = solve_exact(mu_s, mu_t, CostOracle(mu_s.cloud(), mu_t.cloud()));
    const auto m = marginals(sol.plan);
    double ms = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      CHECK(std::abs(m.source[i] - mu_s.masses()[i]) <= 1e-9);
      ms += m.source[i];
    }
    for (std::size_t j = 0; j < nt; ++j) {
      CHECK(std::abs(m.target[j] - mu_t.masses()[j]) <= 1e-9);
      mt += m.target[j];
    }
    CHECK(std::abs(ms - 1.0) <= 1e-9);
    CHECK(std::abs(mt - 1.0) <= 1e-9);
  }
}

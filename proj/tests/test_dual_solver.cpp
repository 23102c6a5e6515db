#include <algorithm>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "fastot/dual_solver.hpp"
#include "fastot/errors.hpp"
#include "fastot/exact_oracle.hpp"
#include "fastot/morph.hpp"
#include "oracles.hpp"

using namespace fastot;
using testing::rel_diff;

namespace {

struct Instance {
  DiscreteMeasure mu_s;
  DiscreteMeasure mu_t;
};

Instance uniform_int_instance(std::uint64_t seed, std::size_t ns, std::size_t nt) {
  std::mt19937_64 rng(seed);
  auto a = uniform_measure(testing::integer_cloud(rng, ns));
  auto b = uniform_measure(testing::integer_cloud(rng, nt));
  return {std::move(a), std::move(b)};
}

Instance weighted_instance(std::uint64_t seed, std::size_t ns, std::size_t nt) {
  std::mt19937_64 rng(seed);
  auto cs = testing::real_cloud(rng, ns);
  auto ct = testing::real_cloud(rng, nt);
  auto ms = testing::random_masses(rng, ns);
  auto mt = testing::random_masses(rng, nt);
  return {DiscreteMeasure(std::move(cs), std::move(ms)), DiscreteMeasure(std::move(ct), std::move(mt))};
}

}  // namespace

TEST_CASE("dual_objective") {
  const auto in = weighted_instance(20, 3, 4);
  DualPotentials p{std::vector<double>(3, 0.0), std::vector<double>(4, 0.0)};
  CHECK(dual_objective(p, in.mu_s, in.mu_t) == 0.0);
  p.phi.assign(3, 2.5);
  p.psi.assign(4, -2.5);
  CHECK(std::abs(dual_objective(p, in.mu_s, in.mu_t)) <= 1e-12);
  p.psi.pop_back();
  CHECK_THROWS_AS(dual_objective(p, in.mu_s, in.mu_t), InvalidInput);

  const auto u = uniform_int_instance(21, 4, 4);
  const CostOracle o(u.mu_s.cloud(), u.mu_t.cloud());
  const auto exact = solve_exact(u.mu_s, u.mu_t, o);
  CHECK(rel_diff(dual_objective(exact.potentials, u.mu_s, u.mu_t), exact.objective) <= 1e-9);
}

TEST_CASE("sgd_epoch on a single pair makes the constraint tight") {
  const auto a = uniform_measure(PointCloud::from_rows({{0, 0}}));
  const auto b = uniform_measure(PointCloud::from_rows({{3, 4}}));
  const CostOracle o(a.cloud(), b.cloud());
  const SolverConfig cfg;
  auto st = make_state(o, cfg);
  sgd_epoch(st, a, b, o, cfg);
  const auto p = project_feasible(st.potentials, o);
  CHECK(p.phi[0] + p.psi[0] == doctest::Approx(25.0).epsilon(1e-15));
  CHECK(st.epochs == 1);
  CHECK(st.svr.step_index == 2);
}

TEST_CASE("a zero step leaves feasible potentials unchanged") {
  const auto in = weighted_instance(22, 5, 6);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  SolverConfig cfg;
  cfg.base_step = 0.0;
  cfg.step_decay = StepDecay::Constant;
  auto st = make_state(o, cfg);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : st.potentials.phi) x = u(rng);
  st.potentials = project_feasible(st.potentials, o);
  const auto before = st.potentials;
  for (int e = 0; e < 3; ++e) sgd_epoch(st, in.mu_s, in.mu_t, o, cfg);
  CHECK(st.potentials.phi == before.phi);
  CHECK(st.potentials.psi == before.psi);
}

TEST_CASE("4x4 instance, seed 7, 500 epochs reaches a relative gap of 1e-3") {
  const auto in = uniform_int_instance(7, 4, 4);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  SolverConfig cfg;
  cfg.seed = 7;
  cfg.step_decay = StepDecay::InverseSqrt;
  auto st = make_state(o, cfg);
  for (int e = 0; e < 500; ++e) sgd_epoch(st, in.mu_s, in.mu_t, o, cfg);
  const double exact = solve_exact(in.mu_s, in.mu_t, o).objective;
  const double dual = dual_objective(project_feasible(st.potentials, o), in.mu_s, in.mu_t);
  CHECK((exact - dual) / exact <= 1e-3);
  CHECK(dual <= exact + 1e-9);
}

TEST_CASE("weak duality holds for every projected epoch") {
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const auto in = seed % 2 ? weighted_instance(seed, 2 + seed % 6, 3 + seed % 5)
                             : uniform_int_instance(seed, 5, 5);
    const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
    const double exact = solve_exact(in.mu_s, in.mu_t, o).objective;
    SolverConfig cfg;
    cfg.seed = seed;
    auto st = make_state(o, cfg);
    for (int e = 0; e < 60; ++e) {
      sgd_epoch(st, in.mu_s, in.mu_t, o, cfg);
      const auto p = project_feasible(st.potentials, o);
      REQUIRE(dual_objective(p, in.mu_s, in.mu_t) <= exact + 1e-9);
    }
  }
}

TEST_CASE("median dual value over seeds does not decrease across epochs") {
  const auto in = uniform_int_instance(41, 6, 6);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  const std::vector<int> marks{1, 4, 16, 64, 256};
  std::vector<std::vector<double>> values(marks.size());
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    SolverConfig cfg;
    cfg.seed = seed;
    auto st = make_state(o, cfg);
    std::size_t m = 0;
    for (int e = 1; e <= marks.back(); ++e) {
      sgd_epoch(st, in.mu_s, in.mu_t, o, cfg);
      if (e == marks[m]) {
        values[m++].push_back(dual_objective(project_feasible(st.potentials, o), in.mu_s, in.mu_t));
      }
    }
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (auto& v : values) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    const double median = v[v.size() / 2];
    CHECK(median >= prev - 1e-12);
    prev = median;
  }
}

TEST_CASE("sgd state invariants") {
  const auto in = weighted_instance(42, 4, 7);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  const SolverConfig cfg;
  auto st = make_state(o, cfg);
  for (int e = 0; e < 20; ++e) sgd_epoch(st, in.mu_s, in.mu_t, o, cfg);
  CHECK(st.svr.grad_phi_acc.size() == 4);
  CHECK(st.svr.grad_psi_acc.size() == 7);
  for (auto v : st.svr.source_visits) CHECK(v <= st.svr.step_index);
  for (auto v : st.svr.target_visits) CHECK(v <= st.svr.step_index);
  for (double x : st.potentials.phi) CHECK(std::isfinite(x));
  CHECK(st.state_bytes() == (4 + 7) * (8 + 8 + 4 + 4));
}

TEST_CASE("project_feasible") {
  const auto in = weighted_instance(43, 3, 3);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  DualPotentials zero{std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)};
  const auto p0 = project_feasible(zero, o);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = o(0, j);
    for (std::size_t i = 1; i < 3; ++i) m = std::min(m, o(i, j));
    CHECK(p0.psi[j] == m);
  }

  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    DualPotentials p{std::vector<double>(3), std::vector<double>(3)};
    for (auto& x : p.phi) x = u(rng);
    for (auto& x : p.psi) x = u(rng);
    const auto q = project_feasible(p, o);
    CHECK(testing::max_violation(q, o) <= 1e-9);
    const auto r = project_feasible(q, o);
    CHECK(r.psi == q.psi);  // idempotent
  }

  // Slack feasible potentials are raised to the c-transform.
  DualPotentials slack{std::vector<double>(3, 0.0), std::vector<double>(3, -10.0)};
  const auto raised = project_feasible(slack, o);
  for (std::size_t j = 0; j < 3; ++j) CHECK(raised.psi[j] > -10.0);
  CHECK_THROWS_AS(project_feasible(DualPotentials{{0.0}, {0.0}}, o), InvalidInput);
}

TEST_CASE("extract_support") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const auto in = weighted_instance(seed, 6, 5);
    const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
    const auto exact = solve_exact(in.mu_s, in.mu_t, o);
    const auto support = extract_support(exact.potentials, o, 1e-9);
    for (const auto& e : exact.plan.entries()) {
      CHECK(std::binary_search(support.begin(), support.end(), IndexPair{e.i, e.j}));
    }
    CHECK(std::is_sorted(support.begin(), support.end()));
    const auto all = extract_support(exact.potentials, o, std::numeric_limits<double>::infinity());
    CHECK(all.size() == 30);
  }
  const auto a = uniform_measure(PointCloud::from_rows({{1, 2}}));
  const auto b = uniform_measure(PointCloud::from_rows({{-1, 0}}));
  const CostOracle o(a.cloud(), b.cloud());
  const auto p = project_feasible(DualPotentials{{0.0}, {0.0}}, o);
  CHECK(extract_support(p, o, 0.0) == Support{{0, 0}});
  CHECK_THROWS_AS(extract_support(DualPotentials{{-100.0}, {-100.0}}, o, 1e-6), SupportEmpty);
}

TEST_CASE("translation invariance") {
  const auto in = weighted_instance(61, 5, 4);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  const auto exact = solve_exact(in.mu_s, in.mu_t, o);
  auto shifted = exact.potentials;
  // A power of two keeps phi + psi exact, so the support comparison is exact.
  for (auto& x : shifted.phi) x += 0.25;
  for (auto& x : shifted.psi) x -= 0.25;
  CHECK(std::abs(dual_objective(shifted, in.mu_s, in.mu_t) -
                 dual_objective(exact.potentials, in.mu_s, in.mu_t)) <= 1e-12);
  CHECK(extract_support(shifted, o, 1e-6) == extract_support(exact.potentials, o, 1e-6));
}

TEST_CASE("solve on identical clouds returns the identity at zero cost") {
  std::mt19937_64 rng(62);
  const auto mu = uniform_measure(testing::real_cloud(rng, 10));
  const auto sol = solve(mu, mu, CostOracle(mu.cloud(), mu.cloud()));
  CHECK(sol.primal_cost == 0.0);
  double off_diagonal = 0.0;
  for (const auto& e : sol.plan.entries()) {
    if (e.i != e.j) off_diagonal += e.mass;
  }
  CHECK(off_diagonal <= 1e-9);
  CHECK(sol.plan.size() == 10);
}

TEST_CASE("8x8 uniform instances match the exact solver (100 seeds)") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto in = uniform_int_instance(1000 + seed, 8, 8);
    const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
    SolverConfig cfg;
    cfg.seed = seed;
    const auto sol = solve(in.mu_s, in.mu_t, o, cfg);
    const double exact = solve_exact(in.mu_s, in.mu_t, o).objective;
    CHECK(rel_diff(sol.primal_cost, exact) <= 1e-6);
  }
}

TEST_CASE("solution invariants on mixed instances") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t ns = 1 + seed % 9;
    const std::size_t nt = 1 + (seed * 7) % 9;
    const auto in = weighted_instance(2000 + seed, ns, nt);
    const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
    SolverConfig cfg;
    cfg.seed = seed;
    const auto sol = solve(in.mu_s, in.mu_t, o, cfg);
    CHECK(sol.plan.size() <= ns + nt - 1);
    const auto m = marginals(sol.plan);
    for (std::size_t i = 0; i < ns; ++i) CHECK(std::abs(m.source[i] - in.mu_s.masses()[i]) <= 1e-9);
    for (std::size_t j = 0; j < nt; ++j) CHECK(std::abs(m.target[j] - in.mu_t.masses()[j]) <= 1e-9);
    CHECK(sol.relative_gap >= -1e-9);
    CHECK(sol.relative_gap <= 1e-3);
    CHECK(testing::max_violation(sol.potentials, o) <= 1e-9);
    CHECK(rel_diff(sol.primal_cost, solve_exact(in.mu_s, in.mu_t, o).objective) <= 1e-6);
  }
}

TEST_CASE("identical seeds give identical serialized solutions") {
  const auto in = weighted_instance(70, 7, 6);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  SolverConfig cfg;
  cfg.seed = 5;
  const auto a = solution_to_json(solve(in.mu_s, in.mu_t, o, cfg)).dump();
  const auto b = solution_to_json(solve(in.mu_s, in.mu_t, o, cfg)).dump();
  CHECK(a == b);
  CHECK(a.find("\"peak_state_bytes\"") != std::string::npos);
  CHECK(a.find("\"relative_gap\"") != std::string::npos);
}

TEST_CASE("state memory grows linearly in the number of points") {
  // Peak bytes are the solver state plus the plan, and a basic plan has at
  // most N_s + N_t - 1 entries; the bound below is what solve() can report.
  auto bound = [](std::size_t n) {
    std::vector<double> flat(2 * n, 0.0);
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] = static_cast<double>(k % 97);
    const PointCloud c(2, flat);
    const auto st = make_state(CostOracle(c, c), SolverConfig{});
    return st.state_bytes() + (2 * n - 1) * sizeof(PlanEntry);
  };
  const double b100 = static_cast<double>(bound(100));
  const double b1000 = static_cast<double>(bound(1000));
  const double b10000 = static_cast<double>(bound(10000));
  CHECK(b1000 / b100 <= 12.0);
  CHECK(b10000 / b1000 <= 12.0);

  for (std::size_t n : {100, 1000}) {
    const auto mu_s = uniform_measure(sample_shape(ShapeSpec::circle(n)));
    const auto mu_t = uniform_measure(sample_shape(ShapeSpec::square(n)));
    const auto sol = solve(mu_s, mu_t, CostOracle(mu_s.cloud(), mu_t.cloud()));
    CHECK(sol.peak_state_bytes <= bound(n));
    CHECK(sol.peak_state_bytes >= make_state(CostOracle(mu_s.cloud(), mu_t.cloud()), {}).state_bytes());
  }
}

TEST_CASE("divergence is reported") {
  const auto in = weighted_instance(71, 3, 3);
  const CostOracle o(in.mu_s.cloud(), in.mu_t.cloud());
  SolverConfig cfg;
  cfg.base_step = 1e308;
  cfg.step_decay = StepDecay::Constant;
  CHECK_THROWS_AS(solve(in.mu_s, in.mu_t, o, cfg), Diverged);
}

TEST_CASE("config validation and parsing") {
  SolverConfig bad;
  bad.support_tolerance_rel = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = {};
  bad.ctransform_period = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);

  std::istringstream in(
      "# comment\nmax_epochs = 50\nbase_step = 0.5\nstep_decay = constant\n"
      "support_tolerance_rel=1e-5\ngap_tolerance_rel = 1e-4 # trailing\nseed = 9\n"
      "ctransform_period = 2\n");
  const auto cfg = parse_solver_config(in);
  CHECK(cfg.max_epochs == 50);
  CHECK(cfg.base_step == 0.5);
  CHECK(cfg.step_decay == StepDecay::Constant);
  CHECK(cfg.support_tolerance_rel == 1e-5);
  CHECK(cfg.gap_tolerance_rel == 1e-4);
  CHECK(cfg.seed == 9);
  CHECK(cfg.ctransform_period == 2);

  std::istringstream unknown("learning_rate = 3\n");
  CHECK_THROWS_AS(parse_solver_config(unknown), InvalidInput);
  std::istringstream garbage("max_epochs = ten\n");
  CHECK_THROWS_AS(parse_solver_config(garbage), InvalidInput);
  std::istringstream empty("");
  const auto defaults = parse_solver_config(empty);
  CHECK_FALSE(defaults.base_step.has_value());
  CHECK(defaults.ctransform_period == 10);
}

#include "fastot/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fastot/errors.hpp"
#include "fastot/io.hpp"

namespace fastot {
namespace {

constexpr std::size_t kCostSampleSize = 1000;
constexpr int kMaxDoublings = 20;
// Reduced costs below -kPricingTol * cost_scale count as violated when
// certifying a restricted solution.
constexpr double kPricingTol = 1e-9;

void check_sizes(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                 const CostOracle& oracle) {
  if (mu_s.size() != oracle.n_source() || mu_t.size() != oracle.n_target()) {
    throw InvalidInput("measure sizes do not match the cost oracle");
  }
}

// phi_i <- min_j (C_ij - psi_j). Keeps feasibility and makes every row tight
// somewhere; if psi is already a c-transform of some phi, every column stays
// tight as well.
void tighten_rows(DualPotentials& p, const CostOracle& oracle) {
  std::vector<double> query(oracle.source().dim());
  for (std::size_t i = 0; i < oracle.n_source(); ++i) {
    oracle.source().copy_point(i, query);
    p.phi[i] = kernels::min_shifted(oracle.target().view(), query, p.psi).value;
  }
}

struct Restricted {
  ExactSolution solution;
  Support support;
  double eps_abs = 0.0;
  std::size_t doublings = 0;
};

// Largest C_ij - phi_i - psi_j over all pairs.
double max_reduced_cost(const DualPotentials& p, const CostOracle& oracle) {
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.n_source(); ++i) {
    for (std::size_t j = 0; j < oracle.n_target(); ++j) {
      worst = std::max(worst, oracle(i, j) - p.phi[i] - p.psi[j]);
    }
  }
  return worst;
}

// Extracts the eps-active set of feasible potentials and solves the primal on
// it, doubling eps while the set cannot carry the marginals. The starting eps
// is raised if needed so that the last doubling admits every pair.
std::optional<Restricted> restricted_from_potentials(DualPotentials p,
                                                     const DiscreteMeasure& mu_s,
                                                     const DiscreteMeasure& mu_t,
                                                     const CostOracle& oracle, double eps_abs) {
  tighten_rows(p, oracle);
  const double top = max_reduced_cost(p, oracle) * (1.0 + 1e-9);
  eps_abs = std::max(eps_abs, std::ldexp(top, -kMaxDoublings));
  for (int d = 0; d <= kMaxDoublings; ++d) {
    Support support = extract_support(p, oracle, eps_abs);
    if (auto sol = solve_restricted(mu_s, mu_t, oracle, support)) {
      return Restricted{std::move(*sol), std::move(support), eps_abs, static_cast<std::size_t>(d)};
    }
    eps_abs *= 2.0;
  }
  return std::nullopt;
}

// Gap checks need a restricted solve, so they run on a geometric schedule:
// after 1, 2, 4, 8, ... c-transform periods.
bool is_gap_check(std::size_t epoch, const SolverConfig& cfg) {
  if (epoch == cfg.max_epochs) return true;
  if (epoch % cfg.ctransform_period != 0) return false;
  const std::size_t k = epoch / cfg.ctransform_period;
  return (k & (k - 1)) == 0;
}

// Column generation on top of a feasible restricted solve: any pair whose
// reduced cost under the restricted potentials is negative joins the support
// (the most negative pair of each row per round) until none is left.
std::size_t certify(Restricted& r, const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                    const CostOracle& oracle, double tol) {
  std::size_t rounds = 0;
  std::vector<double> query(oracle.source().dim());
  while (true) {
    const auto& pot = r.solution.potentials;
    Support added;
    for (std::size_t i = 0; i < oracle.n_source(); ++i) {
      oracle.source().copy_point(i, query);
      const auto best = kernels::min_shifted(oracle.target().view(), query, pot.psi);
      if (best.value - pot.phi[i] < -tol) {
        const IndexPair pair{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(best.index)};
        if (!std::binary_search(r.support.begin(), r.support.end(), pair)) added.push_back(pair);
      }
    }
    if (added.empty()) return rounds;
    ++rounds;
    Support merged;
    merged.reserve(r.support.size() + added.size());
    std::merge(r.support.begin(), r.support.end(), added.begin(), added.end(),
               std::back_inserter(merged));
    r.support = std::move(merged);
    auto sol = solve_restricted(mu_s, mu_t, oracle, r.support);
    // Growing a feasible support keeps it feasible.
    if (!sol) throw CapacityError("restricted solve became infeasible while pricing");
    r.solution = std::move(*sol);
  }
}

double step_size(const SolverState& st, const SolverConfig& cfg, std::size_t n) {
  if (cfg.step_decay == StepDecay::Constant) return st.base_step;
  return st.base_step /
         std::sqrt(1.0 + static_cast<double>(st.svr.step_index) / static_cast<double>(n));
}

}  // namespace

void SolverConfig::validate() const {
  if (max_epochs == 0) throw InvalidInput("max_epochs must be positive");
  if (base_step && !(*base_step >= 0.0 && std::isfinite(*base_step))) {
    throw InvalidInput("base_step must be finite and nonnegative");
  }
  if (!(support_tolerance_rel > 0.0 && support_tolerance_rel < 1.0)) {
    throw InvalidInput("support_tolerance_rel must lie in (0, 1)");
  }
  if (!(gap_tolerance_rel > 0.0)) throw InvalidInput("gap_tolerance_rel must be positive");
  if (ctransform_period == 0) throw InvalidInput("ctransform_period must be positive");
}

std::size_t SolverState::state_bytes() const {
  return (potentials.phi.size() + potentials.psi.size()) * sizeof(double) +
         (svr.grad_phi_acc.size() + svr.grad_psi_acc.size()) * sizeof(double) +
         (svr.source_claim.size() + svr.target_claim.size() + svr.source_visits.size() +
          svr.target_visits.size()) *
             sizeof(std::uint32_t);
}

double dual_objective(const DualPotentials& p, const DiscreteMeasure& mu_s,
                      const DiscreteMeasure& mu_t) {
  if (p.phi.size() != mu_s.size() || p.psi.size() != mu_t.size()) {
    throw InvalidInput("potential lengths do not match the measures");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.phi.size(); ++i) total += p.phi[i] * mu_s.masses()[i];
  for (std::size_t j = 0; j < p.psi.size(); ++j) total += p.psi[j] * mu_t.masses()[j];
  return total;
}

double sampled_median_cost(const CostOracle& oracle, std::uint64_t seed) {
  const std::size_t ns = oracle.n_source();
  const std::size_t nt = oracle.n_target();
  std::vector<double> sample;
  if (ns * nt <= kCostSampleSize) {
    sample.reserve(ns * nt);
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) sample.push_back(oracle.unchecked(i, j));
    }
  } else {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick_i(0, ns - 1);
    std::uniform_int_distribution<std::size_t> pick_j(0, nt - 1);
    sample.reserve(kCostSampleSize);
    for (std::size_t k = 0; k < kCostSampleSize; ++k) {
      const std::size_t i = pick_i(rng);
      sample.push_back(oracle.unchecked(i, pick_j(rng)));
    }
  }
  const std::size_t mid = sample.size() / 2;
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(mid), sample.end());
  const double upper = sample[mid];
  if (sample.size() % 2 == 1) return upper;
  const double lower = *std::max_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

SolverState make_state(const CostOracle& oracle, const SolverConfig& cfg) {
  const std::size_t ns = oracle.n_source();
  const std::size_t nt = oracle.n_target();
  SolverState st;
  st.potentials = {std::vector<double>(ns, 0.0), std::vector<double>(nt, 0.0)};
  st.svr.grad_phi_acc.assign(ns, 0.0);
  st.svr.grad_psi_acc.assign(nt, 0.0);
  st.svr.source_claim.assign(ns, 0);
  st.svr.target_claim.assign(nt, 0);
  st.svr.source_visits.assign(ns, 0);
  st.svr.target_visits.assign(nt, 0);
  st.rng.seed(cfg.seed);
  double scale = sampled_median_cost(oracle, cfg.seed);
  if (!(scale > 0.0)) {
    // Degenerate clouds: fall back to the largest sampled cost, then to 1.
    scale = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(ns, 32); ++i) {
      for (std::size_t j = 0; j < std::min<std::size_t>(nt, 32); ++j) {
        scale = std::max(scale, oracle.unchecked(i, j));
      }
    }
    if (!(scale > 0.0)) scale = 1.0;
  }
  st.cost_scale = scale;
  st.base_step = cfg.base_step ? *cfg.base_step : scale;
  return st;
}

void sgd_epoch(SolverState& st, const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
               const CostOracle& oracle, const SolverConfig& cfg) {
  check_sizes(mu_s, mu_t, oracle);
  const std::size_t ns = oracle.n_source();
  const std::size_t nt = oracle.n_target();
  const std::size_t n = ns + nt;
  auto& phi = st.potentials.phi;
  auto& psi = st.potentials.psi;
  auto& svr = st.svr;
  const auto a = mu_s.masses();
  const auto b = mu_t.masses();
  std::vector<double> query(oracle.source().dim());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  for (std::size_t step = 0; step < n; ++step) {
    const double lambda = step_size(st, cfg, n);
    ++svr.step_index;
    const std::size_t k = pick(st.rng);
    std::size_t i = 0;
    std::size_t j = 0;
    double slack_min = 0.0;  // min over the partner side of C - (partner potential)
    if (k < ns) {
      i = k;
      oracle.source().copy_point(i, query);
      const auto best = kernels::min_shifted(oracle.target().view(), query, psi);
      j = best.index;
      slack_min = best.value;
      if (svr.source_visits[i] > 0) svr.grad_psi_acc[svr.source_claim[i]] -= a[i];
      svr.source_claim[i] = static_cast<std::uint32_t>(j);
      svr.grad_psi_acc[j] += a[i];
      ++svr.source_visits[i];
      // Supply minus the mass the targets currently claim from i.
      phi[i] += lambda * (a[i] - svr.grad_phi_acc[i]);
      const double violation = phi[i] - slack_min;
      if (violation > 0.0) {
        phi[i] -= 0.5 * violation;
        psi[j] -= 0.5 * violation;
      }
    } else {
      j = k - ns;
      oracle.target().copy_point(j, query);
      const auto best = kernels::min_shifted(oracle.source().view(), query, phi);
      i = best.index;
      slack_min = best.value;
      if (svr.target_visits[j] > 0) svr.grad_phi_acc[svr.target_claim[j]] -= b[j];
      svr.target_claim[j] = static_cast<std::uint32_t>(i);
      svr.grad_phi_acc[i] += b[j];
      ++svr.target_visits[j];
      psi[j] += lambda * (b[j] - svr.grad_psi_acc[j]);
      const double violation = psi[j] - slack_min;
      if (violation > 0.0) {
        phi[i] -= 0.5 * violation;
        psi[j] -= 0.5 * violation;
      }
    }
    if (!std::isfinite(phi[i]) || !std::isfinite(psi[j])) {
      st.diverged = true;
      return;
    }
  }
  ++st.epochs;
}

DualPotentials project_feasible(DualPotentials p, const CostOracle& oracle) {
  if (p.phi.size() != oracle.n_source() || p.psi.size() != oracle.n_target()) {
    throw InvalidInput("potential lengths do not match the cost oracle");
  }
  std::vector<double> query(oracle.target().dim());
  for (std::size_t j = 0; j < oracle.n_target(); ++j) {
    oracle.target().copy_point(j, query);
    p.psi[j] = kernels::min_shifted(oracle.source().view(), query, p.phi).value;
  }
  return p;
}

Support extract_support(const DualPotentials& p, const CostOracle& oracle, double eps_abs) {
  if (p.phi.size() != oracle.n_source() || p.psi.size() != oracle.n_target()) {
    throw InvalidInput("potential lengths do not match the cost oracle");
  }
  Support support;
  std::vector<double> query(oracle.source().dim());
  std::vector<std::uint32_t> cols;
  for (std::size_t i = 0; i < oracle.n_source(); ++i) {
    oracle.source().copy_point(i, query);
    cols.clear();
    // C_ij - psi_j <= phi_i + eps
    kernels::collect_below(oracle.target().view(), query, p.psi, p.phi[i] + eps_abs, cols);
    for (std::uint32_t j : cols) support.emplace_back(static_cast<std::uint32_t>(i), j);
  }
  if (support.empty()) throw SupportEmpty("no constraint is active within the tolerance");
  return support;
}

OTSolution solve(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                 const CostOracle& oracle, const SolverConfig& cfg) {
  cfg.validate();
  check_sizes(mu_s, mu_t, oracle);

  SolverState st = make_state(oracle, cfg);
  st.potentials = project_feasible(std::move(st.potentials), oracle);
  const double eps_base = cfg.support_tolerance_rel * st.cost_scale;
  // Later gap checks start a little below the last tolerance that worked
  // instead of climbing the whole doubling ladder again.
  double eps_start = eps_base;
  std::size_t peak = st.state_bytes();
  std::optional<Restricted> restricted;

  std::size_t epochs_used = 0;
  for (std::size_t e = 1; e <= cfg.max_epochs; ++e) {
    sgd_epoch(st, mu_s, mu_t, oracle, cfg);
    epochs_used = e;
    if (st.diverged) throw Diverged("dual ascent diverged in epoch " + std::to_string(e));
    const bool check = is_gap_check(e, cfg);
    if (e % cfg.ctransform_period != 0 && !check) continue;
    st.potentials = project_feasible(std::move(st.potentials), oracle);
    if (!check) continue;
    const double dual = dual_objective(st.potentials, mu_s, mu_t);
    auto checkpoint = restricted_from_potentials(st.potentials, mu_s, mu_t, oracle, eps_start);
    if (!checkpoint) continue;
    eps_start = std::max(eps_base, checkpoint->eps_abs / 4.0);
    peak = std::max(peak, st.state_bytes() + checkpoint->solution.plan.bytes());
    const double primal = checkpoint->solution.objective;
    if ((primal - dual) / std::max(primal, 1e-30) <= cfg.gap_tolerance_rel) {
      restricted = std::move(checkpoint);
      break;
    }
  }

  if (!restricted) {
    // Always c-transform before the final extraction.
    st.potentials = project_feasible(std::move(st.potentials), oracle);
    restricted = restricted_from_potentials(st.potentials, mu_s, mu_t, oracle, eps_start);
  }
  if (!restricted) {
    throw CapacityError("active set still cannot carry the marginals after " +
                        std::to_string(kMaxDoublings) + " tolerance doublings");
  }
  const std::size_t rounds = certify(*restricted, mu_s, mu_t, oracle, kPricingTol * st.cost_scale);

  OTSolution out{std::move(restricted->solution.plan), {}, 0.0, 0.0, 0.0, epochs_used, 0,
                 restricted->support.size(),
                 static_cast<std::size_t>(std::lround(std::log2(restricted->eps_abs / eps_base))),
                 rounds};
  // Certified potentials, made exactly feasible by one c-transform.
  out.potentials = project_feasible(std::move(restricted->solution.potentials), oracle);
  out.primal_cost = plan_cost(out.plan, oracle);
  out.dual_value = dual_objective(out.potentials, mu_s, mu_t);
  out.relative_gap = (out.primal_cost - out.dual_value) / std::max(out.primal_cost, 1e-30);
  out.peak_state_bytes = std::max(peak, st.state_bytes() + out.plan.bytes());
  return out;
}

nlohmann::ordered_json solution_to_json(const OTSolution& s) {
  auto j = io::plan_to_json(s.plan);
  j["primal_cost"] = s.primal_cost;
  j["dual_value"] = s.dual_value;
  j["relative_gap"] = s.relative_gap;
  j["epochs"] = s.epochs_used;
  j["peak_state_bytes"] = s.peak_state_bytes;
  return j;
}

}  // namespace fastot

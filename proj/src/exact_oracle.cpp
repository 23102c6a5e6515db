#include "fastot/exact_oracle.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "fastot/errors.hpp"
#include "network_simplex.hpp"

namespace fastot {
namespace {

void check_inputs(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                  const CostOracle& oracle) {
  if (mu_s.size() != oracle.n_source() || mu_t.size() != oracle.n_target()) {
    throw InvalidInput("measure sizes do not match the cost oracle");
  }
}

std::optional<ExactSolution> finish(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                                    const CostOracle& oracle, detail::SimplexOutcome outcome) {
  if (!outcome.feasible) return std::nullopt;
  TransportPlan plan(mu_s.size(), mu_t.size(), std::move(outcome.entries));
  const double objective = plan_cost(plan, oracle);
  return ExactSolution{std::move(plan),
                       objective,
                       true,
                       DualPotentials{std::move(outcome.phi), std::move(outcome.psi)},
                       outcome.pivots,
                       outcome.working_bytes};
}

}  // namespace

ExactSolution solve_exact(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                          const CostOracle& oracle, const ExactConfig& cfg) {
  check_inputs(mu_s, mu_t, oracle);
  const std::size_t ns = mu_s.size();
  const std::size_t nt = mu_t.size();
  if (ns * nt > cfg.dense_cap) {
    throw CapacityError("dense problem of " + std::to_string(ns) + " x " + std::to_string(nt) +
                        " exceeds the cap of " + std::to_string(cfg.dense_cap) + " entries");
  }
  detail::TransportArcs arcs;
  arcs.source.resize(ns * nt);
  arcs.target.resize(ns * nt);
  arcs.cost.resize(ns * nt);
  std::vector<double> query(oracle.source().dim());
  for (std::size_t i = 0; i < ns; ++i) {
    oracle.source().copy_point(i, query);
    kernels::sq_dists(oracle.target().view(), query,
                      std::span<double>(arcs.cost.data() + i * nt, nt));
    for (std::size_t j = 0; j < nt; ++j) {
      arcs.source[i * nt + j] = static_cast<std::uint32_t>(i);
      arcs.target[i * nt + j] = static_cast<std::uint32_t>(j);
    }
  }
  auto solution = finish(mu_s, mu_t, oracle,
                         detail::solve_transport(mu_s.masses(), mu_t.masses(), arcs));
  // Both measures carry unit mass, so the complete bipartite graph is always feasible.
  if (!solution) throw CapacityError("exact solver failed to reach a feasible basis");
  return std::move(*solution);
}

std::optional<ExactSolution> solve_restricted(const DiscreteMeasure& mu_s,
                                              const DiscreteMeasure& mu_t,
                                              const CostOracle& oracle,
                                              std::span<const IndexPair> support) {
  check_inputs(mu_s, mu_t, oracle);
  if (support.empty()) throw InvalidInput("restricted solve needs a nonempty support");
  Support pairs(support.begin(), support.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  detail::TransportArcs arcs;
  arcs.source.reserve(pairs.size());
  arcs.target.reserve(pairs.size());
  arcs.cost.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    arcs.source.push_back(i);
    arcs.target.push_back(j);
    arcs.cost.push_back(oracle(i, j));
  }
  return finish(mu_s, mu_t, oracle, detail::solve_transport(mu_s.masses(), mu_t.masses(), arcs));
}

}  // namespace fastot

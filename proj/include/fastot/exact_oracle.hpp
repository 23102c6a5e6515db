#pragma once
// Exact discrete optimal transport by network simplex on the bipartite
// transportation graph. Used as the ground truth for the fast solver and as
// its restricted-primal engine.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "fastot/measures.hpp"
#include "fastot/potentials.hpp"

namespace fastot {

struct ExactConfig {
  // Largest n_source * n_target the dense solver will materialize.
  std::size_t dense_cap = 1'000'000;
};

struct ExactSolution {
  TransportPlan plan;
  double objective = 0.0;
  bool is_basic = true;
  // Potentials of the final basis: phi_i + psi_j <= C_ij on every arc the
  // solver saw, with equality on basic arcs.
  DualPotentials potentials;
  std::size_t pivots = 0;
  std::size_t working_bytes = 0;
};

// Throws CapacityError when n_source * n_target exceeds cfg.dense_cap.
ExactSolution solve_exact(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                          const CostOracle& oracle, const ExactConfig& cfg = {});

// Optimal plan with gamma_ij = 0 outside `support`; std::nullopt when the
// support cannot carry the marginals. Duplicate pairs are ignored.
std::optional<ExactSolution> solve_restricted(const DiscreteMeasure& mu_s,
                                              const DiscreteMeasure& mu_t,
                                              const CostOracle& oracle,
                                              std::span<const IndexPair> support);

// Bytes of a dense double-precision coupling matrix.
constexpr std::uint64_t dense_gamma_bytes(std::uint64_t n_source, std::uint64_t n_target) {
  return n_source * n_target * sizeof(double);
}

}  // namespace fastot

#pragma once
// Fast discrete OT: stochastic ascent on the Kantorovich dual with
// aggregated-gradient variance reduction, recovery of the active constraint
// set, and an exact solve restricted to that set.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "json.hpp"

#include "fastot/exact_oracle.hpp"
#include "fastot/measures.hpp"
#include "fastot/potentials.hpp"

namespace fastot {

enum class StepDecay { InverseSqrt, Constant };

struct SolverConfig {
  std::size_t max_epochs = 400;
  // Initial step. Unset means the median sampled cost, which makes the
  // iteration invariant under rescaling of the coordinates.
  std::optional<double> base_step;
  StepDecay step_decay = StepDecay::InverseSqrt;
  double support_tolerance_rel = 1e-6;
  double gap_tolerance_rel = 1e-3;
  std::uint64_t seed = 0;
  std::size_t ctransform_period = 10;

  // Throws InvalidInput.
  void validate() const;
};

// Flat "key = value" lines; '#' starts a comment. Keys are the field names
// above; step_decay takes inverse_sqrt or constant, base_step takes a number
// or "auto".
SolverConfig parse_solver_config(std::istream& in);
SolverConfig load_solver_config(const std::filesystem::path& path);

// Variance-reduction memory. Each source keeps the target it was last seen
// to prefer (its stored stochastic gradient) and vice versa; the
// accumulators hold the running sums of those stored gradients, i.e. the mass
// currently claimed from every point.
struct SvrState {
  std::vector<double> grad_phi_acc;  // mass claimed from source i by targets
  std::vector<double> grad_psi_acc;  // mass claimed from target j by sources
  std::vector<std::uint32_t> source_claim;
  std::vector<std::uint32_t> target_claim;
  std::vector<std::uint32_t> source_visits;
  std::vector<std::uint32_t> target_visits;
  std::uint64_t step_index = 0;
};

struct SolverState {
  DualPotentials potentials;
  SvrState svr;
  std::mt19937_64 rng;
  double cost_scale = 1.0;  // median of the sampled costs
  double base_step = 1.0;
  std::uint64_t epochs = 0;
  bool diverged = false;

  // Bytes held by the potentials and the variance-reduction tables.
  std::size_t state_bytes() const;
};

struct OTSolution {
  TransportPlan plan;
  // Certified optimal potentials of the final restricted solve.
  DualPotentials potentials;
  double primal_cost = 0.0;
  double dual_value = 0.0;
  double relative_gap = 0.0;
  std::size_t epochs_used = 0;
  std::size_t peak_state_bytes = 0;
  // Diagnostics.
  std::size_t support_size = 0;
  std::size_t eps_doublings = 0;
  std::size_t pricing_rounds = 0;
};

double dual_objective(const DualPotentials& p, const DiscreteMeasure& mu_s,
                      const DiscreteMeasure& mu_t);

// Median cost over a fixed sample of at most 1000 entries (all entries when
// there are fewer). Depends only on the clouds and the seed.
double sampled_median_cost(const CostOracle& oracle, std::uint64_t seed);

// Zero potentials, empty tables, generator seeded from cfg.seed.
SolverState make_state(const CostOracle& oracle, const SolverConfig& cfg);

// One pass of n_source + n_target randomized coordinate updates.
void sgd_epoch(SolverState& state, const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
               const CostOracle& oracle, const SolverConfig& cfg);

// psi_j <- min_i (C_ij - phi_i). The result satisfies every constraint.
DualPotentials project_feasible(DualPotentials p, const CostOracle& oracle);

// All (i, j) with C_ij - phi_i - psi_j <= eps_abs, sorted. Throws SupportEmpty
// when nothing qualifies.
Support extract_support(const DualPotentials& p, const CostOracle& oracle, double eps_abs);

OTSolution solve(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                 const CostOracle& oracle, const SolverConfig& cfg = {});

// Plan fields plus primal_cost, dual_value, relative_gap, epochs and
// peak_state_bytes.
nlohmann::ordered_json solution_to_json(const OTSolution& s);

}  // namespace fastot

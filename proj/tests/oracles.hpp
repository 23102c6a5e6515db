#pragma once
// Independent reference computations for the tests: brute-force assignment,
// random instance generators and exhaustive constraint checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "fastot/measures.hpp"
#include "fastot/potentials.hpp"

namespace fastot::testing {

// Minimum of sum_i C(i, perm(i)) over all permutations, divided by n.
inline double brute_force_assignment(const CostOracle& oracle) {
  const std::size_t n = oracle.n_source();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += oracle(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

inline PointCloud integer_cloud(std::mt19937_64& rng, std::size_t n, std::size_t dim = 2,
                                int hi = 9) {
  std::uniform_int_distribution<int> coord(0, hi);
  std::vector<double> flat(n * dim);
  for (auto& x : flat) x = coord(rng);
  return PointCloud(dim, flat);
}

inline PointCloud real_cloud(std::mt19937_64& rng, std::size_t n, std::size_t dim = 2) {
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<double> flat(n * dim);
  for (auto& x : flat) x = coord(rng);
  return PointCloud(dim, flat);
}

// Positive masses bounded away from zero, normalized to sum to 1.
inline std::vector<double> random_masses(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> w(0.2, 1.0);
  std::vector<double> m(n);
  double total = 0.0;
  for (auto& x : m) total += (x = w(rng));
  for (auto& x : m) x /= total;
  // Push the rounding residue into the first entry.
  m[0] += 1.0 - std::accumulate(m.begin(), m.end(), 0.0);
  return m;
}

// Largest phi_i + psi_j - C_ij over all pairs.
inline double max_violation(const DualPotentials& p, const CostOracle& oracle) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < oracle.n_source(); ++i) {
    for (std::size_t j = 0; j < oracle.n_target(); ++j) {
      worst = std::max(worst, p.phi[i] + p.psi[j] - oracle(i, j));
    }
  }
  return worst;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace fastot::testing

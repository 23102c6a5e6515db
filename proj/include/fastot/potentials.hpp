#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fastot {

// Kantorovich potentials: phi over source points, psi over target points.
struct DualPotentials {
  std::vector<double> phi;
  std::vector<double> psi;
};

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;
// Set of (source, target) pairs, kept sorted and duplicate-free by the code
// that produces it.
using Support = std::vector<IndexPair>;

}  // namespace fastot

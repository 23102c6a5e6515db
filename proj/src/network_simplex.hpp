#pragma once
// Primal network simplex for the uncapacitated transportation problem.
//
// Nodes are the S sources, the T targets and an artificial root. Every
// non-root node starts attached to the root by an artificial arc whose cost is
// a symbolic "big M": costs and potentials are carried as (multiple of M,
// remainder) pairs and compared lexicographically, so the artificial arcs do
// not pollute the precision of the real potentials. The spanning tree is kept
// strongly feasible (Cunningham's leaving-arc rule), which rules out cycling
// on degenerate pivots.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fastot/measures.hpp"

namespace fastot::detail {

struct TransportArcs {
  std::vector<std::uint32_t> source;  // in [0, S)
  std::vector<std::uint32_t> target;  // in [0, T)
  std::vector<double> cost;
};

struct SimplexOutcome {
  bool feasible = false;
  std::vector<PlanEntry> entries;  // basic arcs with positive flow
  std::vector<double> phi;
  std::vector<double> psi;
  std::size_t pivots = 0;
  std::size_t working_bytes = 0;
};

SimplexOutcome solve_transport(std::span<const double> supply, std::span<const double> demand,
                               const TransportArcs& arcs);

}  // namespace fastot::detail

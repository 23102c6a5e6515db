#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fastot/errors.hpp"

namespace fastot::detail {
namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
// Dantzig pricing (full scan, lowest index on ties) up to this many arcs,
// block search above it.
constexpr std::size_t kFullPricingArcs = 1u << 16;
// Flow left on an artificial arc above this level means the arc set cannot
// carry the marginals.
constexpr double kArtificialFlowTol = 1e-10;
// Basic flows at or below this level are dropped from the reported plan.
constexpr double kFlowDropTol = 1e-13;

// Potential or reduced cost of the form big * M + small.
struct Lex {
  std::int64_t big;
  double small;
};

class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                   const TransportArcs& arcs)
      : n_src_(supply.size()),
        n_tgt_(demand.size()),
        n_real_(arcs.cost.size()),
        root_(static_cast<std::uint32_t>(n_src_ + n_tgt_)) {
    const std::size_t n_nodes = n_src_ + n_tgt_ + 1;
    const std::size_t n_arcs = n_real_ + n_src_ + n_tgt_;
    tail_.resize(n_arcs);
    head_.resize(n_arcs);
    cost_.resize(n_real_);
    double max_cost = 0.0;
    for (std::size_t a = 0; a < n_real_; ++a) {
      tail_[a] = arcs.source[a];
      head_[a] = static_cast<std::uint32_t>(n_src_ + arcs.target[a]);
      cost_[a] = arcs.cost[a];
      max_cost = std::max(max_cost, std::abs(arcs.cost[a]));
    }
    max_cost_ = max_cost;
    tol_ = 1e-11 * (max_cost + 1.0);

    parent_.assign(n_nodes, kNone);
    pred_.assign(n_nodes, kNone);
    up_.assign(n_nodes, 0);
    flow_.assign(n_nodes, 0.0);
    depth_.assign(n_nodes, 0);
    pot_big_.assign(n_nodes, 0);
    pot_small_.assign(n_nodes, 0.0);

    for (std::uint32_t v = 0; v < root_; ++v) {
      const auto art = static_cast<std::uint32_t>(n_real_ + v);
      const bool is_source = v < n_src_;
      const double mass = is_source ? supply[v] : demand[v - n_src_];
      parent_[v] = root_;
      pred_[v] = art;
      flow_[v] = mass;
      // Zero-flow tree arcs must point away from the root.
      if (is_source && mass > 0.0) {
        tail_[art] = v;
        head_[art] = root_;
        up_[v] = 1;
      } else {
        tail_[art] = root_;
        head_[art] = v;
        up_[v] = 0;
      }
    }
    block_ = n_arcs <= kFullPricingArcs
                 ? n_arcs
                 : std::max<std::size_t>(static_cast<std::size_t>(std::sqrt(double(n_arcs))), 64);
    rebuild_tree_data();
  }

  SimplexOutcome run() {
    const std::size_t pivot_limit = 64 * tail_.size() + 100000;
    SimplexOutcome out;
    std::uint32_t entering = kNone;
    while (find_entering(entering)) {
      pivot(entering);
      if (++out.pivots > pivot_limit) throw CapacityError("network simplex pivot limit exceeded");
    }

    out.feasible = true;
    for (std::uint32_t v = 0; v < root_; ++v) {
      if (pred_[v] >= n_real_ && flow_[v] > kArtificialFlowTol) out.feasible = false;
    }
    for (std::uint32_t v = 0; v < root_; ++v) {
      const std::uint32_t a = pred_[v];
      if (a < n_real_ && flow_[v] > kFlowDropTol) {
        out.entries.push_back({tail_[a], static_cast<std::uint32_t>(head_[a] - n_src_), flow_[v]});
      }
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });

    // Concrete value for the symbolic M, large enough that every lexicographic
    // sign is preserved.
    const double big_m = 2.0 * (max_cost_ + 1.0) * static_cast<double>(root_ + 2);
    // Reduced cost convention: cost + pi(tail) - pi(head) >= 0, so
    // phi_i = -pi(i) and psi_j = pi(S + j).
    out.phi.resize(n_src_);
    out.psi.resize(n_tgt_);
    for (std::size_t i = 0; i < n_src_; ++i) {
      out.phi[i] = -(static_cast<double>(pot_big_[i]) * big_m + pot_small_[i]);
    }
    for (std::size_t j = 0; j < n_tgt_; ++j) {
      const std::size_t v = n_src_ + j;
      out.psi[j] = static_cast<double>(pot_big_[v]) * big_m + pot_small_[v];
    }
    if (n_src_ > 0) {
      const double shift = out.phi[0];
      for (double& p : out.phi) p -= shift;
      for (double& p : out.psi) p += shift;
    }
    out.working_bytes = tail_.size() * (2 * sizeof(std::uint32_t)) + cost_.size() * sizeof(double) +
                        parent_.size() * (3 * sizeof(std::uint32_t) + sizeof(std::uint8_t) +
                                          2 * sizeof(double) + sizeof(std::int64_t) +
                                          2 * sizeof(std::uint32_t));
    return out;
  }

 private:
  Lex reduced_cost(std::uint32_t a) const {
    const std::uint32_t t = tail_[a];
    const std::uint32_t h = head_[a];
    const bool artificial = a >= n_real_;
    return {(artificial ? 1 : 0) + pot_big_[t] - pot_big_[h],
            (artificial ? 0.0 : cost_[a]) + pot_small_[t] - pot_small_[h]};
  }

  static bool lex_less(const Lex& x, const Lex& y) {
    return x.big != y.big ? x.big < y.big : x.small < y.small;
  }

  bool find_entering(std::uint32_t& entering) {
    const std::size_t n_arcs = tail_.size();
    std::size_t pos = block_ == n_arcs ? 0 : next_arc_;
    Lex best{0, -tol_};
    std::uint32_t best_arc = kNone;
    std::size_t in_block = 0;
    for (std::size_t scanned = 0; scanned < n_arcs; ++scanned) {
      const Lex rc = reduced_cost(static_cast<std::uint32_t>(pos));
      if (lex_less(rc, best)) {
        best = rc;
        best_arc = static_cast<std::uint32_t>(pos);
      }
      if (++pos == n_arcs) pos = 0;
      if (++in_block == block_) {
        if (best_arc != kNone) break;
        in_block = 0;
      }
    }
    if (best_arc == kNone) return false;
    next_arc_ = pos;
    entering = best_arc;
    return true;
  }

  std::uint32_t find_join(std::uint32_t u, std::uint32_t v) const {
    while (u != v) {
      if (depth_[u] > depth_[v]) {
        u = parent_[u];
      } else if (depth_[v] > depth_[u]) {
        v = parent_[v];
      } else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    return u;
  }

  void pivot(std::uint32_t entering) {
    // Flow is pushed along entering = (first -> second), then up from second
    // to the join node and down from the join node to first.
    const std::uint32_t first = tail_[entering];
    const std::uint32_t second = head_[entering];
    const std::uint32_t join = find_join(first, second);

    double delta = std::numeric_limits<double>::infinity();
    std::uint32_t leaving_node = kNone;
    bool leaving_on_first_side = false;
    // First side: strict comparison keeps the blocking arc closest to
    // `first`; second side: <= keeps the one closest to the join. Together
    // this picks the last blocking arc along the cycle orientation.
    for (std::uint32_t x = first; x != join; x = parent_[x]) {
      if (up_[x] && flow_[x] < delta) {
        delta = flow_[x];
        leaving_node = x;
        leaving_on_first_side = true;
      }
    }
    for (std::uint32_t x = second; x != join; x = parent_[x]) {
      if (!up_[x] && flow_[x] <= delta) {
        delta = flow_[x];
        leaving_node = x;
        leaving_on_first_side = false;
      }
    }
    if (leaving_node == kNone) throw CapacityError("network simplex: unbounded pivot");

    if (delta > 0.0) {
      for (std::uint32_t x = first; x != join; x = parent_[x]) flow_[x] += up_[x] ? -delta : delta;
      for (std::uint32_t x = second; x != join; x = parent_[x]) flow_[x] += up_[x] ? delta : -delta;
    }

    // Re-hang the subtree cut off by the leaving arc from the entering arc.
    std::uint32_t cur = leaving_on_first_side ? first : second;
    std::uint32_t new_parent = leaving_on_first_side ? second : first;
    std::uint32_t new_pred = entering;
    double new_flow = delta;
    while (true) {
      const std::uint32_t old_parent = parent_[cur];
      const std::uint32_t old_pred = pred_[cur];
      const double old_flow = flow_[cur];
      parent_[cur] = new_parent;
      pred_[cur] = new_pred;
      flow_[cur] = new_flow;
      up_[cur] = tail_[new_pred] == cur ? 1 : 0;
      if (cur == leaving_node) break;
      new_parent = cur;
      new_pred = old_pred;
      new_flow = old_flow;
      cur = old_parent;
    }
    rebuild_tree_data();
  }

  // Depths and potentials from scratch, breadth-first from the root.
  void rebuild_tree_data() {
    const std::size_t n_nodes = parent_.size();
    child_start_.assign(n_nodes + 1, 0);
    for (std::uint32_t v = 0; v < n_nodes; ++v) {
      if (parent_[v] != kNone) ++child_start_[parent_[v] + 1];
    }
    for (std::size_t v = 0; v < n_nodes; ++v) child_start_[v + 1] += child_start_[v];
    children_.resize(n_nodes);
    fill_.assign(child_start_.begin(), child_start_.end() - 1);
    for (std::uint32_t v = 0; v < n_nodes; ++v) {
      if (parent_[v] != kNone) children_[fill_[parent_[v]]++] = v;
    }
    queue_.clear();
    queue_.push_back(root_);
    depth_[root_] = 0;
    pot_big_[root_] = 0;
    pot_small_[root_] = 0.0;
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      const std::uint32_t p = queue_[q];
      for (std::uint32_t k = child_start_[p]; k < child_start_[p + 1]; ++k) {
        const std::uint32_t v = children_[k];
        const std::uint32_t a = pred_[v];
        const bool artificial = a >= n_real_;
        const std::int64_t cb = artificial ? 1 : 0;
        const double cs = artificial ? 0.0 : cost_[a];
        depth_[v] = depth_[p] + 1;
        // Tree arcs have zero reduced cost: cost + pi(tail) - pi(head) = 0.
        if (up_[v]) {
          pot_big_[v] = pot_big_[p] - cb;
          pot_small_[v] = pot_small_[p] - cs;
        } else {
          pot_big_[v] = pot_big_[p] + cb;
          pot_small_[v] = pot_small_[p] + cs;
        }
        queue_.push_back(v);
      }
    }
  }

  std::size_t n_src_;
  std::size_t n_tgt_;
  std::size_t n_real_;
  std::uint32_t root_;
  double max_cost_ = 0.0;
  double tol_ = 0.0;
  std::size_t block_ = 0;
  std::size_t next_arc_ = 0;

  std::vector<std::uint32_t> tail_;
  std::vector<std::uint32_t> head_;
  std::vector<double> cost_;

  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> pred_;
  std::vector<std::uint8_t> up_;  // pred arc points from the node to its parent
  std::vector<double> flow_;      // flow on the pred arc
  std::vector<std::uint32_t> depth_;
  std::vector<std::int64_t> pot_big_;
  std::vector<double> pot_small_;

  std::vector<std::uint32_t> child_start_;
  std::vector<std::uint32_t> children_;
  std::vector<std::uint32_t> fill_;
  std::vector<std::uint32_t> queue_;
};

}  // namespace

SimplexOutcome solve_transport(std::span<const double> supply, std::span<const double> demand,
                               const TransportArcs& arcs) {
  TransportSimplex simplex(supply, demand, arcs);
  return simplex.run();
}

}  // namespace fastot::detail

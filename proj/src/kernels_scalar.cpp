#include "fastot/kernels.hpp"

namespace fastot::kernels {
namespace {

inline double sq_dist_at(CloudView c, const double* q, std::size_t i) {
  double acc = 0.0;
  for (std::size_t d = 0; d < c.dim; ++d) {
    const double diff = c.coords[d * c.n + i] - q[d];
    acc = acc + diff * diff;
  }
  return acc;
}

void sq_dists_scalar(CloudView c, const double* q, double* out) {
  for (std::size_t i = 0; i < c.n; ++i) out[i] = sq_dist_at(c, q, i);
}

MinResult min_shifted_scalar(CloudView c, const double* q, const double* offset) {
  MinResult best{sq_dist_at(c, q, 0) - offset[0], 0};
  for (std::size_t i = 1; i < c.n; ++i) {
    const double v = sq_dist_at(c, q, i) - offset[i];
    if (v < best.value) best = {v, i};
  }
  return best;
}

void collect_below_scalar(CloudView c, const double* q, const double* offset, double threshold,
                          std::vector<std::uint32_t>& out) {
  for (std::size_t i = 0; i < c.n; ++i) {
    if (sq_dist_at(c, q, i) - offset[i] <= threshold) out.push_back(static_cast<std::uint32_t>(i));
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{sq_dists_scalar, min_shifted_scalar, collect_below_scalar,
                                 "scalar"};
  return table;
}

}  // namespace fastot::kernels

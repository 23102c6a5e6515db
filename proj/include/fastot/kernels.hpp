#pragma once
// Data-parallel inner loops of the solvers.
//
// Every kernel evaluates squared Euclidean distances between one query point
// and all points of a cloud stored coordinate-major ("structure of arrays"):
// coordinate d of point i lives at coords[d * n + i]. Each kernel has a
// scalar reference version and an AVX2 version; the AVX2 code performs the
// same floating-point operations in the same order per point (no FMA), so both
// backends return bit-identical results. The active backend is chosen once at
// startup from the CPU features and can be overridden with the environment
// variable FASTOT_KERNELS=scalar|avx2 or with force_backend().

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fastot::kernels {

struct CloudView {
  const double* coords = nullptr;
  std::size_t n = 0;
  std::size_t dim = 0;
};

struct MinResult {
  double value;
  std::size_t index;
};

// out[i] = |x_i - q|^2
using SqDistsFn = void (*)(CloudView cloud, const double* query, double* out);
// min_i |x_i - q|^2 - offset[i], ties to the lowest i. Requires cloud.n >= 1.
using MinShiftedFn = MinResult (*)(CloudView cloud, const double* query, const double* offset);
// Appends every i with |x_i - q|^2 - offset[i] <= threshold, in increasing order.
using CollectFn = void (*)(CloudView cloud, const double* query, const double* offset,
                           double threshold, std::vector<std::uint32_t>& out);

struct KernelTable {
  SqDistsFn sq_dists;
  MinShiftedFn min_shifted;
  CollectFn collect_below;
  std::string_view name;
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool backend_available(Backend b);
// Throws InvalidInput when the backend is unavailable on this machine.
void force_backend(Backend b);
Backend active_backend();
const KernelTable& active();

inline void sq_dists(CloudView cloud, std::span<const double> query, std::span<double> out) {
  active().sq_dists(cloud, query.data(), out.data());
}
inline MinResult min_shifted(CloudView cloud, std::span<const double> query,
                             std::span<const double> offset) {
  return active().min_shifted(cloud, query.data(), offset.data());
}
inline void collect_below(CloudView cloud, std::span<const double> query,
                          std::span<const double> offset, double threshold,
                          std::vector<std::uint32_t>& out) {
  active().collect_below(cloud, query.data(), offset.data(), threshold, out);
}

}  // namespace fastot::kernels

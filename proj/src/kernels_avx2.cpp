// Compiled with -mavx2 (and deliberately without -mfma) on x86-64 only.
#include "fastot/kernels.hpp"

#if defined(FASTOT_HAVE_AVX2)

#include <immintrin.h>

#include <limits>

namespace fastot::kernels {
namespace {

inline __m256d sq_dist4(CloudView c, const double* q, std::size_t i) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t d = 0; d < c.dim; ++d) {
    const __m256d x = _mm256_loadu_pd(c.coords + d * c.n + i);
    const __m256d diff = _mm256_sub_pd(x, _mm256_set1_pd(q[d]));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
  }
  return acc;
}

inline double sq_dist1(CloudView c, const double* q, std::size_t i) {
  double acc = 0.0;
  for (std::size_t d = 0; d < c.dim; ++d) {
    const double diff = c.coords[d * c.n + i] - q[d];
    acc = acc + diff * diff;
  }
  return acc;
}

void sq_dists_avx2(CloudView c, const double* q, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= c.n; i += 4) _mm256_storeu_pd(out + i, sq_dist4(c, q, i));
  for (; i < c.n; ++i) out[i] = sq_dist1(c, q, i);
}

MinResult min_shifted_avx2(CloudView c, const double* q, const double* offset) {
  std::size_t i = 0;
  MinResult best{std::numeric_limits<double>::infinity(), 0};
  if (c.n >= 4) {
    __m256d best_v = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_i = _mm256_setzero_pd();
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);
    for (; i + 4 <= c.n; i += 4) {
      const __m256d v = _mm256_sub_pd(sq_dist4(c, q, i), _mm256_loadu_pd(offset + i));
      // Strict comparison keeps the earliest index within each lane.
      const __m256d lt = _mm256_cmp_pd(v, best_v, _CMP_LT_OQ);
      best_v = _mm256_blendv_pd(best_v, v, lt);
      best_i = _mm256_blendv_pd(best_i, idx, lt);
      idx = _mm256_add_pd(idx, four);
    }
    alignas(32) double vals[4];
    alignas(32) double inds[4];
    _mm256_store_pd(vals, best_v);
    _mm256_store_pd(inds, best_i);
    for (int lane = 0; lane < 4; ++lane) {
      const auto li = static_cast<std::size_t>(inds[lane]);
      if (vals[lane] < best.value || (vals[lane] == best.value && li < best.index)) {
        best = {vals[lane], li};
      }
    }
  }
  for (; i < c.n; ++i) {
    const double v = sq_dist1(c, q, i) - offset[i];
    if (v < best.value) best = {v, i};
  }
  return best;
}

void collect_below_avx2(CloudView c, const double* q, const double* offset, double threshold,
                        std::vector<std::uint32_t>& out) {
  std::size_t i = 0;
  const __m256d thr = _mm256_set1_pd(threshold);
  for (; i + 4 <= c.n; i += 4) {
    const __m256d v = _mm256_sub_pd(sq_dist4(c, q, i), _mm256_loadu_pd(offset + i));
    int mask = _mm256_movemask_pd(_mm256_cmp_pd(v, thr, _CMP_LE_OQ));
    while (mask != 0) {
      const int lane = __builtin_ctz(static_cast<unsigned>(mask));
      out.push_back(static_cast<std::uint32_t>(i + static_cast<std::size_t>(lane)));
      mask &= mask - 1;
    }
  }
  for (; i < c.n; ++i) {
    if (sq_dist1(c, q, i) - offset[i] <= threshold) out.push_back(static_cast<std::uint32_t>(i));
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{sq_dists_avx2, min_shifted_avx2, collect_below_avx2, "avx2"};
  return &table;
}

}  // namespace fastot::kernels

#else

namespace fastot::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace fastot::kernels

#endif

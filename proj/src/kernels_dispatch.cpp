#include <atomic>
#include <cstdlib>
#include <string_view>

#include "fastot/errors.hpp"
#include "fastot/kernels.hpp"

namespace fastot::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(FASTOT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend initial_backend() {
  const char* env = std::getenv("FASTOT_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return Backend::Scalar;
  return (avx2_table() != nullptr && cpu_has_avx2()) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_available(Backend b) {
  if (b == Backend::Scalar) return true;
  return avx2_table() != nullptr && cpu_has_avx2();
}

void force_backend(Backend b) {
  if (!backend_available(b)) throw InvalidInput("requested kernel backend is not available");
  current().store(b);
}

Backend active_backend() { return current().load(); }

const KernelTable& active() {
  return active_backend() == Backend::Avx2 ? *avx2_table() : scalar_table();
}

}  // namespace fastot::kernels

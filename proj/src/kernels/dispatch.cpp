#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"
#include "qrng/kernels.hpp"

namespace qrng::kernels {
namespace {

constexpr KernelTable kScalar{Isa::scalar, "scalar", scalar::popcount, scalar::xor_words,
                              scalar::transitions, scalar::window_parity};

#if QRNG_HAVE_AVX2
constexpr KernelTable kAvx2{Isa::avx2, "avx2", avx2::popcount, avx2::xor_words, avx2::transitions,
                            avx2::window_parity};
#endif

bool force_scalar() {
  const char* v = std::getenv("QRNG_FORCE_SCALAR");
  return v != nullptr && std::strcmp(v, "0") != 0 && v[0] != '\0';
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if QRNG_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable* table = [] {
    if (force_scalar()) return &kScalar;
    const KernelTable* fast = avx2_table();
    return fast != nullptr ? fast : &kScalar;
  }();
  return *table;
}

}  // namespace qrng::kernels

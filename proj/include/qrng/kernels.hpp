#pragma once

// Word-level bit kernels. Each entry has a portable scalar reference and,
// where the CPU supports it, an AVX2 variant picked at startup. The scalar
// table is always available so tests can compare the two.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace qrng::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;

  /// Total set bits over n words.
  std::uint64_t (*popcount)(const std::uint64_t* words, std::size_t n);

  /// out[i] = a[i] ^ b[i]; out may alias a or b.
  void (*xor_words)(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t n);

  /// Number of adjacent positions i < nbits-1 with bit i != bit i+1.
  std::uint64_t (*transitions)(const std::uint64_t* words, std::size_t nbits);

  /// Parity of <window, x> over GF(2) where window bit j is bit
  /// (offset + j) of `seed`, for j < 64 * nwords. `seed` must hold at least
  /// one readable word past (offset + 64 * nwords) / 64.
  bool (*window_parity)(const std::uint64_t* seed, std::size_t offset, const std::uint64_t* x,
                        std::size_t nwords);
};

const KernelTable& scalar_table() noexcept;

/// Nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

/// Best table for this machine. Setting QRNG_FORCE_SCALAR=1 in the
/// environment pins the scalar path.
const KernelTable& active() noexcept;

}  // namespace qrng::kernels

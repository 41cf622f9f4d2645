#include <bit>

#include "kernels_impl.hpp"

namespace qrng::kernels::scalar {

std::uint64_t popcount(const std::uint64_t* words, std::size_t n) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += static_cast<std::uint64_t>(std::popcount(words[i]));
  return total;
}

void xor_words(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] ^ b[i];
}

std::uint64_t transitions(const std::uint64_t* words, std::size_t nbits) {
  if (nbits < 2) return 0;
  const std::size_t n = (nbits + 63) / 64;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t next = i + 1 < n ? words[i + 1] : 0;
    // bit j of diff compares bit j with bit j+1 of the stream
    std::uint64_t diff = words[i] ^ ((words[i] >> 1) | (next << 63));
    const std::size_t first = i * 64;
    const std::size_t last_pair = nbits - 1;  // pairs (j, j+1) with j < last_pair
    if (first + 64 > last_pair) {
      const std::size_t keep = last_pair - first;
      diff &= keep == 0 ? 0 : (keep >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << keep) - 1);
    }
    total += static_cast<std::uint64_t>(std::popcount(diff));
  }
  return total;
}

bool window_parity(const std::uint64_t* seed, std::size_t offset, const std::uint64_t* x,
                   std::size_t nwords) {
  const std::uint64_t* s = seed + (offset >> 6);
  const unsigned shift = static_cast<unsigned>(offset & 63);
  std::uint64_t acc = 0;
  if (shift == 0) {
    for (std::size_t j = 0; j < nwords; ++j) acc ^= s[j] & x[j];
  } else {
    for (std::size_t j = 0; j < nwords; ++j) {
      const std::uint64_t w = (s[j] >> shift) | (s[j + 1] << (64 - shift));
      acc ^= w & x[j];
    }
  }
  return (std::popcount(acc) & 1) != 0;
}

}  // namespace qrng::kernels::scalar

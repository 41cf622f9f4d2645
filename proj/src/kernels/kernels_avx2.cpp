#include <immintrin.h>

#include <bit>

#include "kernels_impl.hpp"

namespace qrng::kernels::avx2 {
namespace {

// Per-byte popcount via nibble lookup, summed into four 64-bit lanes.
inline __m256i popcount_lanes(__m256i v) {
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                       0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i lo = _mm256_and_si256(v, low_mask);
  const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
  const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
  return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline std::uint64_t horizontal_sum(__m256i v) {
  return static_cast<std::uint64_t>(_mm256_extract_epi64(v, 0)) +
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 1)) +
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 2)) +
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 3));
}

inline std::uint64_t horizontal_xor(__m256i v) {
  return static_cast<std::uint64_t>(_mm256_extract_epi64(v, 0)) ^
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 1)) ^
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 2)) ^
         static_cast<std::uint64_t>(_mm256_extract_epi64(v, 3));
}

inline __m256i load(const std::uint64_t* p) {
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p));
}

}  // namespace

std::uint64_t popcount(const std::uint64_t* words, std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_epi64(acc, popcount_lanes(load(words + i)));
  std::uint64_t total = horizontal_sum(acc);
  for (; i < n; ++i) total += static_cast<std::uint64_t>(std::popcount(words[i]));
  return total;
}

void xor_words(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_xor_si256(load(a + i), load(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] ^ b[i];
}

std::uint64_t transitions(const std::uint64_t* words, std::size_t nbits) {
  if (nbits < 2) return 0;
  const std::size_t n = (nbits + 63) / 64;
  // words below `full` have every position paired with an in-range successor
  const std::size_t full = (nbits - 1) / 64;
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= full; i += 4) {
    const __m256i w = load(words + i);
    const __m256i next = load(words + i + 1);
    const __m256i shifted = _mm256_or_si256(_mm256_srli_epi64(w, 1), _mm256_slli_epi64(next, 63));
    acc = _mm256_add_epi64(acc, popcount_lanes(_mm256_xor_si256(w, shifted)));
  }
  std::uint64_t total = horizontal_sum(acc);
  const std::size_t last_pair = nbits - 1;
  for (; i < n; ++i) {
    const std::uint64_t next = i + 1 < n ? words[i + 1] : 0;
    std::uint64_t diff = words[i] ^ ((words[i] >> 1) | (next << 63));
    const std::size_t first = i * 64;
    if (first + 64 > last_pair) {
      const std::size_t keep = last_pair - first;
      diff &= keep == 0 ? 0 : (std::uint64_t{1} << keep) - 1;
    }
    total += static_cast<std::uint64_t>(std::popcount(diff));
  }
  return total;
}

bool window_parity(const std::uint64_t* seed, std::size_t offset, const std::uint64_t* x,
                   std::size_t nwords) {
  const std::uint64_t* s = seed + (offset >> 6);
  const int shift = static_cast<int>(offset & 63);
  __m256i acc = _mm256_setzero_si256();
  std::size_t j = 0;
  std::uint64_t tail = 0;
  if (shift == 0) {
    for (; j + 4 <= nwords; j += 4) acc = _mm256_xor_si256(acc, _mm256_and_si256(load(s + j), load(x + j)));
    for (; j < nwords; ++j) tail ^= s[j] & x[j];
  } else {
    const __m128i right = _mm_cvtsi32_si128(shift);
    const __m128i left = _mm_cvtsi32_si128(64 - shift);
    for (; j + 4 <= nwords; j += 4) {
      const __m256i w = _mm256_or_si256(_mm256_srl_epi64(load(s + j), right),
                                        _mm256_sll_epi64(load(s + j + 1), left));
      acc = _mm256_xor_si256(acc, _mm256_and_si256(w, load(x + j)));
    }
    for (; j < nwords; ++j) tail ^= ((s[j] >> shift) | (s[j + 1] << (64 - shift))) & x[j];
  }
  return (std::popcount(horizontal_xor(acc) ^ tail) & 1) != 0;
}

}  // namespace qrng::kernels::avx2

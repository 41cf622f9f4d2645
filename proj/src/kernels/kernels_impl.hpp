#pragma once

#include <cstddef>
#include <cstdint>

namespace qrng::kernels::scalar {
std::uint64_t popcount(const std::uint64_t* words, std::size_t n);
void xor_words(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t n);
std::uint64_t transitions(const std::uint64_t* words, std::size_t nbits);
bool window_parity(const std::uint64_t* seed, std::size_t offset, const std::uint64_t* x,
                   std::size_t nwords);
}  // namespace qrng::kernels::scalar

#if QRNG_HAVE_AVX2
namespace qrng::kernels::avx2 {
std::uint64_t popcount(const std::uint64_t* words, std::size_t n);
void xor_words(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t n);
std::uint64_t transitions(const std::uint64_t* words, std::size_t nbits);
bool window_parity(const std::uint64_t* seed, std::size_t offset, const std::uint64_t* x,
                   std::size_t nwords);
}  // namespace qrng::kernels::avx2
#endif

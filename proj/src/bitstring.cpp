#include "qrng/bitstring.hpp"

#include <algorithm>

#include "qrng/error.hpp"
#include "qrng/kernels.hpp"

namespace qrng {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parameter_domain: return "parameter-domain";
    case ErrorCode::internal_consistency: return "internal-consistency";
    case ErrorCode::undefined_conditional: return "undefined-conditional";
    case ErrorCode::insufficient_entropy: return "insufficient-entropy";
    case ErrorCode::encoding: return "encoding";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::format: return "format";
    case ErrorCode::config: return "config";
    case ErrorCode::transport: return "transport";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::negotiation: return "negotiation";
    case ErrorCode::authorization: return "authorization";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::incomplete_stream: return "incomplete-stream";
  }
  return "unknown";
}

BitString BitString::from_string(std::string_view text) {
  BitString out;
  out.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') fail(ErrorCode::format, "bit string may only contain '0' and '1'");
    out.push_back(c == '1');
  }
  return out;
}

BitString BitString::from_msb_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits) {
  require(nbits <= bytes.size() * 8, ErrorCode::dimension, "bit count exceeds payload");
  BitString out(nbits);
  for (std::size_t i = 0; i < nbits; ++i) {
    if ((bytes[i >> 3] >> (7 - (i & 7))) & 1u) out.words_[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  return out;
}

void BitString::append(const BitString& other) {
  if ((size_ & 63) == 0) {
    words_.insert(words_.end(), other.words_.begin(), other.words_.end());
    size_ += other.size_;
    return;
  }
  reserve(size_ + other.size_);
  for (std::size_t i = 0; i < other.size_; ++i) push_back(other[i]);
}

void BitString::resize(std::size_t nbits) {
  words_.resize(word_count(nbits), 0);
  size_ = nbits;
  clear_tail();
}

BitString BitString::slice(std::size_t pos, std::size_t len) const {
  require(pos + len <= size_, ErrorCode::dimension, "slice out of range");
  BitString out(len);
  const std::size_t shift = pos & 63;
  const std::size_t base = pos >> 6;
  for (std::size_t w = 0; w < out.words_.size(); ++w) {
    std::uint64_t lo = words_[base + w] >> shift;
    if (shift != 0 && base + w + 1 < words_.size()) lo |= words_[base + w + 1] << (64 - shift);
    out.words_[w] = lo;
  }
  out.clear_tail();
  return out;
}

std::size_t BitString::count_ones() const noexcept {
  return static_cast<std::size_t>(kernels::active().popcount(words_.data(), words_.size()));
}

std::vector<std::uint8_t> BitString::to_msb_bytes() const {
  std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    if ((*this)[i]) out[i >> 3] |= static_cast<std::uint8_t>(0x80u >> (i & 7));
  }
  return out;
}

std::string BitString::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) if ((*this)[i]) s[i] = '1';
  return s;
}

void BitString::clear_tail() noexcept {
  if (size_ & 63) words_.back() &= (std::uint64_t{1} << (size_ & 63)) - 1;
}

BitString operator^(const BitString& a, const BitString& b) {
  require(a.size() == b.size(), ErrorCode::dimension, "XOR of strings with different lengths");
  BitString out(a.size());
  kernels::active().xor_words(a.words().data(), b.words().data(), out.mutable_words().data(),
                              a.words().size());
  return out;
}

}  // namespace qrng

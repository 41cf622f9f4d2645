#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qrng {

/// Growable bit sequence stored in 64-bit words, bit i at word i/64,
/// position i%64. Bits past size() are always zero.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t nbits) : words_(word_count(nbits), 0), size_(nbits) {}

  /// Parses a string of '0'/'1' characters.
  static BitString from_string(std::string_view text);
  /// Unpacks MSB-first packed bytes, keeping the first nbits bits.
  static BitString from_msb_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool operator[](std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v) words_[i >> 6] |= mask; else words_[i >> 6] &= ~mask;
  }

  void push_back(bool v) {
    if ((size_ & 63) == 0) words_.push_back(0);
    if (v) words_[size_ >> 6] |= std::uint64_t{1} << (size_ & 63);
    ++size_;
  }
  void append(const BitString& other);
  void reserve(std::size_t nbits) { words_.reserve(word_count(nbits)); }
  void resize(std::size_t nbits);
  void clear() noexcept { words_.clear(); size_ = 0; }

  /// Copy of bits [pos, pos + len).
  BitString slice(std::size_t pos, std::size_t len) const;

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  std::size_t count_ones() const noexcept;

  /// MSB-first packing; the final byte is zero padded.
  std::vector<std::uint8_t> to_msb_bytes() const;
  std::string to_string() const;

  friend bool operator==(const BitString& a, const BitString& b) noexcept {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

  static constexpr std::size_t word_count(std::size_t nbits) noexcept { return (nbits + 63) / 64; }

 private:
  void clear_tail() noexcept;

  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

/// Elementwise XOR of equal-length strings.
BitString operator^(const BitString& a, const BitString& b);

}  // namespace qrng

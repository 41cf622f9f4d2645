#pragma once

// Wire framing for the verification protocol:
//
//   0x51 | 0x01 | type | u32 big-endian payload length | payload
//
// Bit streams travel as DATA or AUDIT_DATA frames of MSB-first packed bytes.
// A frame whose payload is exactly the remaining byte count plus four is the
// final one; its last four bytes are the big-endian total bit count.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrng/bitstring.hpp"

namespace qrng::net {

inline constexpr std::uint8_t kMagic = 0x51;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kFrameHeader = 7;
inline constexpr std::size_t kDefaultMaxPayload = std::size_t{1} << 20;

enum class MsgType : std::uint8_t {
  session_start = 0x01,
  data = 0x02,
  verify_request = 0x03,
  verdict = 0x04,
  audit_data = 0x05,
  error = 0x06,
};

std::string_view to_string(MsgType t) noexcept;

struct Frame {
  MsgType type = MsgType::error;
  std::vector<std::uint8_t> payload;

  static Frame text(MsgType type, std::string_view body);
  std::string_view body() const noexcept {
    return {reinterpret_cast<const char*>(payload.data()), payload.size()};
  }
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

/// Validates a 7-byte header and returns (type, payload length). Throws
/// ErrorCode::protocol on bad magic, version, type or oversize payload.
std::pair<MsgType, std::uint32_t> decode_header(std::span<const std::uint8_t, kFrameHeader> header,
                                                std::size_t max_payload = kDefaultMaxPayload);

/// Splits a bit string into bit-stream frames of at most `chunk_bytes` data
/// bytes each, the last one carrying the bit-count trailer.
std::vector<Frame> bits_to_frames(MsgType type, const BitString& bits, std::size_t chunk_bytes);

/// Receiver side of a bit stream of known declared length.
class BitAssembler {
 public:
  explicit BitAssembler(std::uint64_t declared_bits);

  /// Consumes one frame payload; returns true once the stream is complete.
  bool add(std::span<const std::uint8_t> payload);

  bool complete() const noexcept { return complete_; }
  std::uint64_t declared_bits() const noexcept { return declared_; }
  std::uint64_t received_bits() const noexcept;
  BitString take() const;

 private:
  std::uint64_t declared_;
  std::uint64_t expected_bytes_;
  std::vector<std::uint8_t> bytes_;
  bool complete_ = false;
};

}  // namespace qrng::net

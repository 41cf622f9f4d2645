#include "qrng/net/framing.hpp"

#include <algorithm>

#include "qrng/error.hpp"

namespace qrng::net {

std::string_view to_string(MsgType t) noexcept {
  switch (t) {
    case MsgType::session_start: return "SESSION_START";
    case MsgType::data: return "DATA";
    case MsgType::verify_request: return "VERIFY_REQUEST";
    case MsgType::verdict: return "VERDICT";
    case MsgType::audit_data: return "AUDIT_DATA";
    case MsgType::error: return "ERROR";
  }
  return "UNKNOWN";
}

Frame Frame::text(MsgType type, std::string_view body) {
  return Frame{type, std::vector<std::uint8_t>(body.begin(), body.end())};
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  const auto len = static_cast<std::uint32_t>(frame.payload.size());
  std::vector<std::uint8_t> out(kFrameHeader + frame.payload.size());
  out[0] = kMagic;
  out[1] = kVersion;
  out[2] = static_cast<std::uint8_t>(frame.type);
  for (int i = 0; i < 4; ++i) out[3 + i] = static_cast<std::uint8_t>(len >> (24 - 8 * i));
  std::copy(frame.payload.begin(), frame.payload.end(), out.begin() + kFrameHeader);
  return out;
}

std::pair<MsgType, std::uint32_t> decode_header(std::span<const std::uint8_t, kFrameHeader> h,
                                                std::size_t max_payload) {
  if (h[0] != kMagic) fail(ErrorCode::protocol, "bad frame magic");
  if (h[1] != kVersion) fail(ErrorCode::protocol, "unsupported protocol version");
  if (h[2] < 0x01 || h[2] > 0x06) fail(ErrorCode::protocol, "unknown message type");
  const std::uint32_t len = (std::uint32_t{h[3]} << 24) | (std::uint32_t{h[4]} << 16) |
                            (std::uint32_t{h[5]} << 8) | std::uint32_t{h[6]};
  if (len > max_payload) fail(ErrorCode::protocol, "frame payload exceeds the negotiated maximum");
  return {static_cast<MsgType>(h[2]), len};
}

std::vector<Frame> bits_to_frames(MsgType type, const BitString& bits, std::size_t chunk_bytes) {
  require(chunk_bytes >= 1, ErrorCode::parameter_domain, "chunk size must be >= 1");
  const auto bytes = bits.to_msb_bytes();
  std::vector<Frame> frames;
  std::size_t pos = 0;
  while (bytes.size() - pos > chunk_bytes) {
    frames.push_back(Frame{type, {bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + chunk_bytes)}});
    pos += chunk_bytes;
  }
  Frame last{type, {bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()}};
  const auto n = static_cast<std::uint32_t>(bits.size());
  last.payload.insert(last.payload.end(), {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                           static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)});
  frames.push_back(std::move(last));
  return frames;
}

BitAssembler::BitAssembler(std::uint64_t declared_bits)
    : declared_(declared_bits), expected_bytes_((declared_bits + 7) / 8) {
  require(declared_bits >= 1 && declared_bits <= 0xffffffffull, ErrorCode::protocol,
          "declared length must lie in [1, 2^32)");
  bytes_.reserve(expected_bytes_);
}

bool BitAssembler::add(std::span<const std::uint8_t> payload) {
  if (complete_) fail(ErrorCode::protocol, "bit stream already complete");
  const std::uint64_t remaining = expected_bytes_ - bytes_.size();
  if (payload.size() <= remaining) {
    bytes_.insert(bytes_.end(), payload.begin(), payload.end());
    return false;
  }
  if (payload.size() != remaining + 4) fail(ErrorCode::protocol, "bit stream overruns its declared length");
  const std::size_t t = payload.size() - 4;
  const std::uint64_t count = (std::uint64_t{payload[t]} << 24) | (std::uint64_t{payload[t + 1]} << 16) |
                              (std::uint64_t{payload[t + 2]} << 8) | std::uint64_t{payload[t + 3]};
  if (count != declared_) fail(ErrorCode::protocol, "bit-count trailer disagrees with the declared length");
  bytes_.insert(bytes_.end(), payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(t));
  complete_ = true;
  return true;
}

std::uint64_t BitAssembler::received_bits() const noexcept {
  return complete_ ? declared_ : std::min<std::uint64_t>(declared_, bytes_.size() * 8);
}

BitString BitAssembler::take() const {
  require(complete_, ErrorCode::incomplete_stream, "incomplete stream");
  return BitString::from_msb_bytes(bytes_, declared_);
}

}  // namespace qrng::net

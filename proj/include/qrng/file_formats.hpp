#pragma once

// On-disk formats.
//
// Packed-bit file:  "QRNGBITS" | u32 version | u64 bit count | MSB-first bytes
// Event file:       "QRNGEVTS" | u32 version | u32 scheme | f64 pulse rate |
//                   f64 bin spacing | u64 pulses | u64 records |
//                   records of (u64 pulse index, u8 click mask)
//
// Integers and doubles are little-endian. Event files hold only pulses with
// at least one click; empty pulses are implied by the pulse count.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qrng/bitstring.hpp"
#include "qrng/optics_sim.hpp"

namespace qrng::io {

inline constexpr char kBitMagic[8] = {'Q', 'R', 'N', 'G', 'B', 'I', 'T', 'S'};
inline constexpr char kEventMagic[8] = {'Q', 'R', 'N', 'G', 'E', 'V', 'T', 'S'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kBitHeaderSize = 20;
inline constexpr std::size_t kEventHeaderSize = 48;
inline constexpr std::size_t kEventRecordSize = 9;

std::vector<std::uint8_t> encode_bit_file(const BitString& bits);
BitString decode_bit_file(std::span<const std::uint8_t> data);

void write_bit_file(const std::filesystem::path& path, const BitString& bits);
BitString read_bit_file(const std::filesystem::path& path);

/// Raw payload for external test suites. A zero-length input or a zero-bit
/// file exports nothing and sets `warning`.
struct ExportedBits {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bits = 0;
  std::string warning;
};

ExportedBits export_bits(std::span<const std::uint8_t> bit_file);
std::string export_sidecar_json(const ExportedBits& exported);

struct EventFileHeader {
  Scheme scheme = Scheme::spatial;
  double pulse_rate = 3e6;
  double bin_spacing = 50e-9;
  std::uint64_t pulses = 0;
  std::uint64_t records = 0;
};

struct EventFile {
  EventFileHeader header;
  std::vector<DetectionRecord> records;  ///< timestamps reconstructed
};

/// Streams records to disk; the header counts are patched on close().
class EventWriter {
 public:
  EventWriter(const std::filesystem::path& path, const EventFileHeader& header);
  ~EventWriter();

  /// Writes records with a non-empty mask; every record counts as a pulse.
  void add(std::span<const DetectionRecord> records);
  void close();

 private:
  std::ofstream out_;
  EventFileHeader header_;
  bool closed_ = false;
};

EventFile read_event_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace qrng::io

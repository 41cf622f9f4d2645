#include "qrng/file_formats.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "qrng/error.hpp"

namespace qrng::io {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t raw = 0;
  std::memcpy(&raw, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(raw >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint64_t raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  T value;
  std::memcpy(&value, &raw, sizeof(T));
  return value;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::format, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> event_header_bytes(const EventFileHeader& h) {
  std::vector<std::uint8_t> out(kEventMagic, kEventMagic + 8);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, h.scheme == Scheme::spatial ? 0u : 1u);
  put_le<double>(out, h.pulse_rate);
  put_le<double>(out, h.bin_spacing);
  put_le<std::uint64_t>(out, h.pulses);
  put_le<std::uint64_t>(out, h.records);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_bit_file(const BitString& bits) {
  std::vector<std::uint8_t> out(kBitMagic, kBitMagic + 8);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, bits.size());
  const auto payload = bits.to_msb_bytes();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

BitString decode_bit_file(std::span<const std::uint8_t> data) {
  if (data.size() < kBitHeaderSize || !std::equal(kBitMagic, kBitMagic + 8, data.begin())) {
    fail(ErrorCode::format, "not a packed-bit file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(data, 8);
  require(version == kFormatVersion, ErrorCode::format, "unsupported bit file version " + std::to_string(version));
  const auto nbits = get_le<std::uint64_t>(data, 12);
  const std::size_t payload = data.size() - kBitHeaderSize;
  require(payload == (nbits + 7) / 8, ErrorCode::format, "bit file payload does not match its bit count");
  return BitString::from_msb_bytes(data.subspan(kBitHeaderSize), nbits);
}

void write_bit_file(const std::filesystem::path& path, const BitString& bits) {
  const auto bytes = encode_bit_file(bits);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::format, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

BitString read_bit_file(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return decode_bit_file(bytes);
}

ExportedBits export_bits(std::span<const std::uint8_t> bit_file) {
  ExportedBits out;
  if (bit_file.empty()) {
    out.warning = "input file is empty";
    return out;
  }
  const BitString bits = decode_bit_file(bit_file);
  out.bits = bits.size();
  out.bytes.assign(bit_file.begin() + kBitHeaderSize, bit_file.end());
  if (out.bits == 0) out.warning = "bit file holds no bits";
  return out;
}

std::string export_sidecar_json(const ExportedBits& exported) {
  nlohmann::json j{{"bits", exported.bits},
                   {"bytes", exported.bytes.size()},
                   {"pad_bits", exported.bytes.size() * 8 - exported.bits},
                   {"bit_order", "msb-first"}};
  return j.dump(2);
}

EventWriter::EventWriter(const std::filesystem::path& path, const EventFileHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
  if (!out_) fail(ErrorCode::format, "cannot write " + path.string());
  header_.pulses = 0;
  header_.records = 0;
  const auto h = event_header_bytes(header_);
  out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
}

EventWriter::~EventWriter() {
  try {
    close();
  } catch (...) {
  }
}

void EventWriter::add(std::span<const DetectionRecord> records) {
  std::vector<std::uint8_t> buf;
  buf.reserve(records.size() * kEventRecordSize / 4 + 16);
  for (const auto& r : records) {
    ++header_.pulses;
    if (r.mask == 0) continue;
    put_le<std::uint64_t>(buf, r.pulse_index);
    buf.push_back(r.mask);
    ++header_.records;
  }
  out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void EventWriter::close() {
  if (closed_) return;
  closed_ = true;
  const auto h = event_header_bytes(header_);
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
  out_.close();
  if (!out_) fail(ErrorCode::format, "failed to finalize event file");
}

EventFile read_event_file(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::span<const std::uint8_t> data(bytes);
  if (data.size() < kEventHeaderSize || !std::equal(kEventMagic, kEventMagic + 8, data.begin())) {
    fail(ErrorCode::format, "not an event file (bad magic)");
  }
  require(get_le<std::uint32_t>(data, 8) == kFormatVersion, ErrorCode::format, "unsupported event file version");
  EventFile f;
  const auto scheme = get_le<std::uint32_t>(data, 12);
  require(scheme <= 1, ErrorCode::format, "unknown scheme code in event file");
  f.header.scheme = scheme == 0 ? Scheme::spatial : Scheme::temporal;
  f.header.pulse_rate = get_le<double>(data, 16);
  f.header.bin_spacing = get_le<double>(data, 24);
  f.header.pulses = get_le<std::uint64_t>(data, 32);
  f.header.records = get_le<std::uint64_t>(data, 40);
  require(data.size() == kEventHeaderSize + f.header.records * kEventRecordSize, ErrorCode::format,
          "event file length does not match its record count");
  require(f.header.pulse_rate > 0.0, ErrorCode::format, "event file has a non-positive pulse rate");
  f.records.reserve(f.header.records);
  for (std::uint64_t i = 0; i < f.header.records; ++i) {
    const std::size_t pos = kEventHeaderSize + i * kEventRecordSize;
    DetectionRecord r;
    r.pulse_index = get_le<std::uint64_t>(data, pos);
    r.mask = data[pos + 8];
    require(r.mask != 0 && r.mask < 16, ErrorCode::format, "invalid click mask in event file");
    r.timestamp = static_cast<double>(r.pulse_index) / f.header.pulse_rate;
    if (f.header.scheme == Scheme::temporal) r.timestamp += std::countr_zero(r.mask) * f.header.bin_spacing;
    f.records.push_back(r);
  }
  return f;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::format, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::format, "cannot write " + path.string());
  out << text;
}

}  // namespace qrng::io

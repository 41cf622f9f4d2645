#pragma once

// Append-only session log plus content-addressed blobs under one directory:
//
//   <root>/sessions.log      one JSON object per line, never rewritten
//   <root>/blobs/<sha256>    packed-bit files and report documents
//
// The in-memory index is rebuilt from the log on construction.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrng/bitstring.hpp"
#include "qrng/net/session.hpp"
#include "qrng/randomness_tests.hpp"

namespace qrng::net {

struct SessionRecord {
  SessionState state;
  std::string bits_ref;
  std::string report_ref;
};

struct AuditRecord {
  std::string session_id;
  std::string bits_ref;
  std::uint64_t bits = 0;
  std::int64_t retained_at = 0;  ///< unix seconds
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  std::string put_blob(std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> get_blob(const std::string& ref) const;

  void open_session(const SessionState& state);
  void abort_session(const std::string& id, const std::string& reason);
  std::string store_bits(const std::string& id, const BitString& bits);
  void store_verdict(const std::string& id, const TestReport& report);
  void close_session(const std::string& id);

  std::optional<SessionRecord> find(const std::string& id) const;
  std::optional<BitString> session_bits(const std::string& id) const;
  std::optional<TestReport> session_report(const std::string& id) const;

  /// False when an audit stream is already held for `id`.
  bool store_audit(const std::string& id, const BitString& bits);
  std::optional<AuditRecord> find_audit(const std::string& id) const;
  std::optional<BitString> audit_bits(const std::string& id) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  void append(const std::string& line);
  void apply(const std::string& line);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, SessionRecord> sessions_;
  std::map<std::string, AuditRecord> audits_;
};

}  // namespace qrng::net

#include "qrng/net/store.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <thread>

#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/file_formats.hpp"

namespace qrng::net {
namespace {

using nlohmann::json;

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::internal_consistency, "SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "blobs");
  std::ifstream log(root_ / "sessions.log");
  std::string line;
  while (std::getline(log, line)) {
    if (!line.empty()) apply(line);
  }
}

std::string SessionStore::put_blob(std::span<const std::uint8_t> bytes) {
  const std::string ref = sha256_hex(bytes);
  const auto path = root_ / "blobs" / ref;
  if (std::filesystem::exists(path)) return ref;
  const auto tmp = root_ / "blobs" / (ref + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::format, "cannot write blob " + ref);
  }
  std::filesystem::rename(tmp, path);
  return ref;
}

std::vector<std::uint8_t> SessionStore::get_blob(const std::string& ref) const {
  std::ifstream in(root_ / "blobs" / ref, std::ios::binary);
  if (!in) fail(ErrorCode::not_found, "missing blob " + ref);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void SessionStore::append(const std::string& line) {
  std::ofstream out(root_ / "sessions.log", std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) fail(ErrorCode::format, "cannot append to session log");
}

void SessionStore::apply(const std::string& line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.contains("event")) return;
  const std::string event = j.at("event");
  const std::string id = j.value("session_id", "");
  if (event == "open") {
    SessionRecord r;
    r.state.session_id = id;
    r.state.phase = Phase::streaming;
    r.state.declared_len = j.at("declared_len");
    r.state.criteria_id = j.at("criteria_id");
    sessions_[id] = r;
    return;
  }
  if (event == "audit") {
    audits_[id] = AuditRecord{id, j.at("bits_ref"), j.at("bits"), j.at("ts")};
    return;
  }
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return;
  auto& r = it->second;
  if (event == "abort") {
    r.state.error = j.at("reason");
  } else if (event == "bits") {
    r.bits_ref = j.at("bits_ref");
    r.state.received_len = r.state.declared_len;
    r.state.phase = Phase::testing;
  } else if (event == "verdict") {
    r.report_ref = j.at("report_ref");
    r.state.verdict = Verdict{j.at("pass"), r.report_ref};
    r.state.phase = Phase::verdict;
  } else if (event == "close") {
    r.state.phase = Phase::closed;
  }
}

void SessionStore::open_session(const SessionState& state) {
  const json j{{"ts", unix_now()}, {"event", "open"}, {"session_id", state.session_id},
               {"declared_len", state.declared_len}, {"criteria_id", state.criteria_id}};
  std::lock_guard lock(mutex_);
  append(j.dump());
  apply(j.dump());
}

void SessionStore::abort_session(const std::string& id, const std::string& reason) {
  const json j{{"ts", unix_now()}, {"event", "abort"}, {"session_id", id}, {"reason", reason}};
  std::lock_guard lock(mutex_);
  append(j.dump());
  apply(j.dump());
}

std::string SessionStore::store_bits(const std::string& id, const BitString& bits) {
  const std::string ref = put_blob(io::encode_bit_file(bits));
  const json j{{"ts", unix_now()}, {"event", "bits"}, {"session_id", id}, {"bits_ref", ref}, {"bits", bits.size()}};
  std::lock_guard lock(mutex_);
  append(j.dump());
  apply(j.dump());
  return ref;
}

void SessionStore::store_verdict(const std::string& id, const TestReport& report) {
  const std::string text = report_to_json(report);
  const std::string ref = put_blob({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  const json j{{"ts", unix_now()}, {"event", "verdict"}, {"session_id", id}, {"report_ref", ref},
               {"pass", report.verdict()}};
  std::lock_guard lock(mutex_);
  append(j.dump());
  apply(j.dump());
}

void SessionStore::close_session(const std::string& id) {
  const json j{{"ts", unix_now()}, {"event", "close"}, {"session_id", id}};
  std::lock_guard lock(mutex_);
  append(j.dump());
  apply(j.dump());
}

std::optional<SessionRecord> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::optional<BitString> SessionStore::session_bits(const std::string& id) const {
  const auto r = find(id);
  if (!r || r->bits_ref.empty()) return std::nullopt;
  return io::decode_bit_file(get_blob(r->bits_ref));
}

std::optional<TestReport> SessionStore::session_report(const std::string& id) const {
  const auto r = find(id);
  if (!r || r->report_ref.empty()) return std::nullopt;
  const auto bytes = get_blob(r->report_ref);
  return report_from_json({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

bool SessionStore::store_audit(const std::string& id, const BitString& bits) {
  const std::string ref = put_blob(io::encode_bit_file(bits));
  const json j{{"ts", unix_now()}, {"event", "audit"}, {"session_id", id}, {"bits_ref", ref}, {"bits", bits.size()}};
  std::lock_guard lock(mutex_);
  if (audits_.count(id)) return false;
  append(j.dump());
  apply(j.dump());
  return true;
}

std::optional<AuditRecord> SessionStore::find_audit(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = audits_.find(id);
  if (it == audits_.end()) return std::nullopt;
  return it->second;
}

std::optional<BitString> SessionStore::audit_bits(const std::string& id) const {
  const auto r = find_audit(id);
  if (!r) return std::nullopt;
  return io::decode_bit_file(get_blob(r->bits_ref));
}

}  // namespace qrng::net

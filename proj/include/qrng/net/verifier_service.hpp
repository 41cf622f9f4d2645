#pragma once

// Third-party verifier. Devices stream a public sequence; the service runs
// the agreed battery on it and answers with a verdict. The same process can
// also hold audit (XOR) streams and hand them to auditors, though in a real
// deployment the auditor endpoint would be a separate party.
//
// Every connection opens with a SESSION_START frame whose JSON body names the
// role, its token and the action:
//
//   device  / submit          {criteria_id, declared_len}
//   device  / commit_audit    {session_id, declared_len}
//   auditor / retrieve_audit  {session_id}
//   reader  / get_verdict     {session_id}
//
// The server acknowledges with its own SESSION_START frame or an ERROR frame
// {"code", "message"}.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "qrng/net/socket.hpp"
#include "qrng/net/store.hpp"
#include "qrng/randomness_tests.hpp"

namespace qrng::net {

struct RoleTokens {
  std::string device = "device-token";
  std::string auditor = "auditor-token";
  std::string reader = "reader-token";
};

struct ServiceConfig {
  Endpoint listen{"127.0.0.1", 0};
  std::filesystem::path storage = "verifier-data";
  std::size_t max_sessions = 16;
  std::size_t max_payload = kDefaultMaxPayload;
  double io_timeout = 30.0;
  RoleTokens tokens;
  std::map<std::string, BatteryConfig> criteria;

  /// Registry holding only the stock battery under id "default".
  static std::map<std::string, BatteryConfig> default_criteria();
};

class VerifierService {
 public:
  explicit VerifierService(ServiceConfig config);
  ~VerifierService();
  VerifierService(const VerifierService&) = delete;
  VerifierService& operator=(const VerifierService&) = delete;

  /// Binds and starts accepting in a background thread.
  void start();
  /// Stops accepting, shuts down live connections and joins every thread.
  void stop();

  std::uint16_t port() const noexcept;
  Endpoint endpoint() const;
  SessionStore& store() noexcept;

  /// Re-runs the session's criteria on its stored bits.
  TestReport replay(const std::string& session_id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qrng::net

#pragma once

// Device side of the delegation protocol. The API only ever accepts the
// public sequence and the audit stream, so the private sequence has no path
// onto the wire.

#include <optional>
#include <string>

#include "qrng/bitstring.hpp"
#include "qrng/net/socket.hpp"
#include "qrng/randomness_tests.hpp"

namespace qrng::net {

struct SubmitOptions {
  std::string criteria_id = "default";
  std::string device_token = "device-token";
  double timeout = 120.0;
  std::size_t chunk_bytes = std::size_t{1} << 16;
  /// Where the audit stream goes; defaults to the verifier endpoint.
  std::optional<Endpoint> audit_endpoint;
  /// Observes every frame this client sends or receives.
  FrameTap tap;
};

struct SubmitResult {
  std::string session_id;
  bool pass = false;
  TestReport report;
  bool audit_committed = false;
};

/// Opens a session, streams `public_bits`, requests verification and waits
/// for the verdict. When `audit` is given and the verdict is pass, the audit
/// stream is committed under the same session id.
SubmitResult device_submit(const Endpoint& verifier, const BitString& public_bits,
                           const SubmitOptions& options, const BitString* audit = nullptr);

/// Fetches a stored audit stream; needs the auditor token.
BitString audit_retrieve(const Endpoint& auditor, const std::string& session_id, const std::string& token,
                         double timeout = 30.0);

/// Fetches the stored verdict document (JSON) of a session.
std::string fetch_verdict(const Endpoint& verifier, const std::string& session_id, const std::string& token,
                          double timeout = 30.0);

/// Raises the typed error carried by an ERROR frame.
[[noreturn]] void raise_error_frame(const Frame& frame);

}  // namespace qrng::net

#include "qrng/net/device_client.hpp"

#include "json.hpp"
#include "qrng/error.hpp"

namespace qrng::net {
namespace {

using nlohmann::json;

ErrorCode parse_code(const std::string& text) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::incomplete_stream); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    if (to_string(code) == text) return code;
  }
  return ErrorCode::protocol;
}

Frame expect(FrameChannel& ch, MsgType type) {
  auto frame = ch.receive();
  if (!frame) fail(ErrorCode::transport, "verifier closed the connection");
  if (frame->type == MsgType::error) raise_error_frame(*frame);
  if (frame->type != type) {
    fail(ErrorCode::protocol, "expected " + std::string(to_string(type)) + ", got " +
                                  std::string(to_string(frame->type)));
  }
  return std::move(*frame);
}

json parse_body(const Frame& f) {
  json j = json::parse(f.body(), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::protocol, "malformed JSON in " + std::string(to_string(f.type)));
  return j;
}

FrameChannel open_channel(const Endpoint& ep, double timeout, const FrameTap& tap) {
  return FrameChannel(Socket::connect(ep, timeout), kDefaultMaxPayload, tap);
}

void commit_audit(const Endpoint& ep, const std::string& id, const BitString& audit, const SubmitOptions& opt) {
  FrameChannel ch = open_channel(ep, opt.timeout, opt.tap);
  ch.send(Frame::text(MsgType::session_start, json{{"role", "device"},
                                                   {"token", opt.device_token},
                                                   {"action", "commit_audit"},
                                                   {"session_id", id},
                                                   {"declared_len", audit.size()}}.dump()));
  expect(ch, MsgType::session_start);
  for (const auto& f : bits_to_frames(MsgType::audit_data, audit, opt.chunk_bytes)) ch.send(f);
  expect(ch, MsgType::session_start);
}

}  // namespace

void raise_error_frame(const Frame& frame) {
  const json j = json::parse(frame.body(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::protocol, "malformed ERROR frame");
  fail(parse_code(j.value("code", "protocol")), j.value("message", "verifier error"));
}

SubmitResult device_submit(const Endpoint& verifier, const BitString& public_bits, const SubmitOptions& options,
                           const BitString* audit) {
  require(!public_bits.empty(), ErrorCode::parameter_domain, "public sequence is empty");
  if (audit) require(audit->size() == public_bits.size(), ErrorCode::dimension, "audit stream length mismatch");

  FrameChannel ch = open_channel(verifier, options.timeout, options.tap);
  ch.send(Frame::text(MsgType::session_start, json{{"role", "device"},
                                                   {"token", options.device_token},
                                                   {"action", "submit"},
                                                   {"criteria_id", options.criteria_id},
                                                   {"declared_len", public_bits.size()}}.dump()));
  SubmitResult result;
  const json ack = parse_body(expect(ch, MsgType::session_start));
  result.session_id = ack.at("session_id").get<std::string>();
  const auto max_payload = ack.value("max_payload", kDefaultMaxPayload);
  if (options.chunk_bytes + 4 > max_payload) {
    fail(ErrorCode::protocol, "chunk of " + std::to_string(options.chunk_bytes) + " bytes exceeds the verifier's " +
                                  std::to_string(max_payload) + "-byte frame limit");
  }
  for (const auto& f : bits_to_frames(MsgType::data, public_bits, options.chunk_bytes)) ch.send(f);
  ch.send(Frame{MsgType::verify_request, {}});
  const json verdict = parse_body(expect(ch, MsgType::verdict));
  result.pass = verdict.at("verdict") == "pass";
  result.report = report_from_json(verdict.at("report").dump());

  if (audit && result.pass) {
    commit_audit(options.audit_endpoint.value_or(verifier), result.session_id, *audit, options);
    result.audit_committed = true;
  }
  return result;
}

BitString audit_retrieve(const Endpoint& auditor, const std::string& session_id, const std::string& token,
                         double timeout) {
  FrameChannel ch = open_channel(auditor, timeout, {});
  ch.send(Frame::text(MsgType::session_start,
                      json{{"role", "auditor"}, {"token", token}, {"action", "retrieve_audit"}, {"session_id", session_id}}
                          .dump()));
  const json ack = parse_body(expect(ch, MsgType::session_start));
  BitAssembler bits(ack.at("declared_len").get<std::uint64_t>());
  while (!bits.complete()) bits.add(expect(ch, MsgType::audit_data).payload);
  return bits.take();
}

std::string fetch_verdict(const Endpoint& verifier, const std::string& session_id, const std::string& token,
                          double timeout) {
  FrameChannel ch = open_channel(verifier, timeout, {});
  ch.send(Frame::text(MsgType::session_start,
                      json{{"role", "reader"}, {"token", token}, {"action", "get_verdict"}, {"session_id", session_id}}
                          .dump()));
  return std::string(expect(ch, MsgType::verdict).body());
}

}  // namespace qrng::net

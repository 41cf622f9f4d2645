#include "qrng/net/session.hpp"

#include <cstdio>
#include <random>

#include "qrng/error.hpp"

namespace qrng::net {

std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::init: return "INIT";
    case Phase::streaming: return "STREAMING";
    case Phase::testing: return "TESTING";
    case Phase::verdict: return "VERDICT";
    case Phase::closed: return "CLOSED";
  }
  return "INIT";
}

std::optional<Phase> parse_phase(std::string_view text) noexcept {
  for (auto p : {Phase::init, Phase::streaming, Phase::testing, Phase::verdict, Phase::closed}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::optional<Phase> transition(Phase from, SessionEvent event) noexcept {
  switch (from) {
    case Phase::init:
      if (event == SessionEvent::start) return Phase::streaming;
      break;
    case Phase::streaming:
      if (event == SessionEvent::data) return Phase::streaming;
      if (event == SessionEvent::verify) return Phase::testing;
      break;
    case Phase::testing:
      if (event == SessionEvent::verdict_ready) return Phase::verdict;
      break;
    case Phase::verdict:
      if (event == SessionEvent::close) return Phase::closed;
      break;
    case Phase::closed:
      break;
  }
  return std::nullopt;
}

void SessionState::advance(SessionEvent event) {
  const auto next = transition(phase, event);
  if (!next) {
    fail(ErrorCode::protocol, "illegal event in phase " + std::string(to_string(phase)));
  }
  phase = *next;
}

std::string new_session_id() {
  std::random_device rd;
  std::string id;
  char buf[9];
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    id += buf;
  }
  return id;
}

}  // namespace qrng::net

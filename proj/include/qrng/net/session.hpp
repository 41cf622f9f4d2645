#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace qrng::net {

enum class Phase : std::uint8_t { init, streaming, testing, verdict, closed };

enum class SessionEvent : std::uint8_t {
  start,          ///< SESSION_START accepted
  data,           ///< DATA frame consumed
  verify,         ///< VERIFY_REQUEST on a complete stream
  verdict_ready,  ///< battery finished
  close,          ///< verdict delivered and connection done
};

inline constexpr std::array<SessionEvent, 5> kAllEvents{SessionEvent::start, SessionEvent::data,
                                                        SessionEvent::verify, SessionEvent::verdict_ready,
                                                        SessionEvent::close};

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> parse_phase(std::string_view text) noexcept;

/// Next phase, or nullopt when the event is illegal in `from`.
std::optional<Phase> transition(Phase from, SessionEvent event) noexcept;

struct Verdict {
  bool pass = false;
  std::string report_ref;  ///< content address of the stored report
};

struct SessionState {
  std::string session_id;  ///< 128-bit id as 32 hex digits
  Phase phase = Phase::init;
  std::uint64_t declared_len = 0;
  std::uint64_t received_len = 0;
  std::string criteria_id;
  std::optional<Verdict> verdict;
  std::string error;  ///< set when the session was aborted

  /// Applies `event`; throws ErrorCode::protocol on an illegal transition.
  void advance(SessionEvent event);
  bool aborted() const noexcept { return !error.empty(); }
};

std::string new_session_id();

}  // namespace qrng::net

#include "qrng/net/verifier_service.hpp"

#include <sys/socket.h>

#include <list>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "qrng/error.hpp"

namespace qrng::net {
namespace {

using nlohmann::json;

constexpr std::size_t kReplyChunk = std::size_t{1} << 16;

Frame error_frame(ErrorCode code, const std::string& message) {
  return Frame::text(MsgType::error, json{{"code", to_string(code)}, {"message", message}}.dump());
}

json verdict_document(const SessionRecord& rec, const TestReport& report) {
  return json{{"session_id", rec.state.session_id},
              {"criteria_id", rec.state.criteria_id},
              {"verdict", report.verdict() ? "pass" : "fail"},
              {"report", json::parse(report_to_json(report))}};
}

}  // namespace

std::map<std::string, BatteryConfig> ServiceConfig::default_criteria() {
  return {{"default", BatteryConfig{}}};
}

struct VerifierService::Impl {
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  ServiceConfig cfg;
  std::unique_ptr<SessionStore> store;
  std::unique_ptr<Listener> listener;
  std::thread acceptor;
  std::atomic<bool> running{false};

  std::mutex mutex;
  std::list<Worker> workers;
  std::set<int> live_fds;
  std::size_t active = 0;

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    if (cfg.criteria.empty()) cfg.criteria = ServiceConfig::default_criteria();
    for (auto& [id, battery] : cfg.criteria) {
      battery.id = id;
      battery.validate();
    }
    store = std::make_unique<SessionStore>(cfg.storage);
  }

  void accept_loop() {
    while (running) {
      Socket s = listener->accept(100);
      reap(false);
      if (!s.valid()) continue;
      std::lock_guard lock(mutex);
      if (active >= cfg.max_sessions) {
        try {
          s.set_timeout(1.0);
          s.send_all(encode_frame(error_frame(ErrorCode::negotiation, "verifier busy")));
        } catch (const Error&) {
        }
        continue;
      }
      ++active;
      live_fds.insert(s.fd());
      auto done = std::make_shared<std::atomic<bool>>(false);
      workers.push_back(Worker{std::thread([this, sock = std::move(s), done]() mutable {
                                 serve_connection(std::move(sock));
                                 *done = true;
                               }),
                               done});
    }
  }

  void reap(bool all) {
    std::list<Worker> finished;
    {
      std::lock_guard lock(mutex);
      for (auto it = workers.begin(); it != workers.end();) {
        if (all || *it->done) {
          finished.splice(finished.end(), workers, it++);
        } else {
          ++it;
        }
      }
    }
    for (auto& w : finished) w.thread.join();
  }

  void serve_connection(Socket sock) {
    const int fd = sock.fd();
    sock.set_timeout(cfg.io_timeout);
    {
      FrameChannel ch(std::move(sock), cfg.max_payload);
      try {
        dispatch(ch);
      } catch (const Error& e) {
        try {
          ch.send(error_frame(e.code(), e.what()));
        } catch (const Error&) {
        }
        ch.socket().finish(1.0);
      } catch (const std::exception& e) {
        try {
          ch.send(error_frame(ErrorCode::internal_consistency, e.what()));
        } catch (const Error&) {
        }
        ch.socket().finish(1.0);
      }
      std::lock_guard lock(mutex);
      live_fds.erase(fd);
      --active;
    }
  }

  void dispatch(FrameChannel& ch) {
    const auto first = ch.receive();
    if (!first) return;
    if (first->type != MsgType::session_start) fail(ErrorCode::protocol, "expected SESSION_START");
    const json req = json::parse(first->body(), nullptr, false);
    if (req.is_discarded() || !req.is_object()) fail(ErrorCode::protocol, "SESSION_START body is not a JSON object");
    const std::string role = req.value("role", "");
    const std::string token = req.value("token", "");
    const std::string action = req.value("action", "submit");

    auto authorize = [&](const std::string& wanted, const std::string& expected) {
      if (role != wanted || token != expected) fail(ErrorCode::authorization, "role '" + wanted + "' required");
    };

    if (action == "submit") {
      authorize("device", cfg.tokens.device);
      submit(ch, req);
    } else if (action == "commit_audit") {
      authorize("device", cfg.tokens.device);
      commit_audit(ch, req);
    } else if (action == "retrieve_audit") {
      authorize("auditor", cfg.tokens.auditor);
      retrieve_audit(ch, req);
    } else if (action == "get_verdict") {
      const bool ok = (role == "reader" && token == cfg.tokens.reader) ||
                      (role == "auditor" && token == cfg.tokens.auditor) ||
                      (role == "device" && token == cfg.tokens.device);
      if (!ok) fail(ErrorCode::authorization, "unknown role or token");
      get_verdict(ch, req);
    } else {
      fail(ErrorCode::protocol, "unknown action '" + action + "'");
    }
  }

  static std::uint64_t declared_length(const json& req) {
    if (!req.contains("declared_len") || !req["declared_len"].is_number_unsigned()) {
      fail(ErrorCode::protocol, "declared_len missing");
    }
    const auto n = req["declared_len"].get<std::uint64_t>();
    if (n < 1 || n > 0xffffffffull) fail(ErrorCode::protocol, "declared_len must lie in [1, 2^32)");
    return n;
  }

  void submit(FrameChannel& ch, const json& req) {
    const std::string criteria_id = req.value("criteria_id", "");
    const auto crit = cfg.criteria.find(criteria_id);
    if (crit == cfg.criteria.end()) fail(ErrorCode::negotiation, "unknown criteria_id '" + criteria_id + "'");

    SessionState st;
    st.session_id = new_session_id();
    st.declared_len = declared_length(req);
    st.criteria_id = criteria_id;
    st.advance(SessionEvent::start);
    store->open_session(st);
    ch.send(Frame::text(MsgType::session_start,
                        json{{"session_id", st.session_id},
                             {"phase", to_string(st.phase)},
                             {"max_payload", cfg.max_payload}}.dump()));

    BitAssembler bits(st.declared_len);
    try {
      for (;;) {
        auto frame = ch.receive();
        if (!frame) fail(ErrorCode::incomplete_stream, "incomplete stream");
        if (frame->type == MsgType::data) {
          bits.add(frame->payload);
          st.advance(SessionEvent::data);
          st.received_len = bits.received_bits();
          continue;
        }
        if (frame->type != MsgType::verify_request) {
          fail(ErrorCode::protocol, "unexpected " + std::string(to_string(frame->type)) + " while streaming");
        }
        if (!bits.complete()) fail(ErrorCode::incomplete_stream, "incomplete stream");
        st.advance(SessionEvent::verify);
        break;
      }
      const BitString q2 = bits.take();
      store->store_bits(st.session_id, q2);
      const TestReport report = run_battery(q2, crit->second);
      store->store_verdict(st.session_id, report);
      st.advance(SessionEvent::verdict_ready);
      const auto rec = store->find(st.session_id);
      ch.send(Frame::text(MsgType::verdict, verdict_document(*rec, report).dump()));
      st.advance(SessionEvent::close);
      store->close_session(st.session_id);
    } catch (const Error& e) {
      store->abort_session(st.session_id, e.what());
      throw;
    }
  }

  void commit_audit(FrameChannel& ch, const json& req) {
    const std::string id = req.value("session_id", "");
    if (id.empty()) fail(ErrorCode::protocol, "session_id missing");
    const std::uint64_t n = declared_length(req);
    // A standalone audit party may not know the session; when it does, the
    // lengths must agree.
    if (const auto rec = store->find(id); rec && rec->state.declared_len != n) {
      fail(ErrorCode::protocol, "audit length differs from the session's declared length");
    }
    BitAssembler bits(n);
    ch.send(Frame::text(MsgType::session_start, json{{"session_id", id}, {"phase", "STREAMING"}}.dump()));
    while (!bits.complete()) {
      auto frame = ch.receive();
      if (!frame) fail(ErrorCode::incomplete_stream, "incomplete audit stream");
      if (frame->type != MsgType::audit_data) fail(ErrorCode::protocol, "expected AUDIT_DATA");
      bits.add(frame->payload);
    }
    if (!store->store_audit(id, bits.take())) fail(ErrorCode::protocol, "audit stream already committed");
    ch.send(Frame::text(MsgType::session_start,
                        json{{"session_id", id}, {"phase", "CLOSED"}, {"audit_bits", bits.declared_bits()}}.dump()));
  }

  void retrieve_audit(FrameChannel& ch, const json& req) {
    const std::string id = req.value("session_id", "");
    const auto bits = store->audit_bits(id);
    if (!bits) fail(ErrorCode::not_found, "no audit stream for session '" + id + "'");
    ch.send(Frame::text(MsgType::session_start, json{{"session_id", id}, {"declared_len", bits->size()}}.dump()));
    for (const auto& f : bits_to_frames(MsgType::audit_data, *bits, kReplyChunk)) ch.send(f);
  }

  void get_verdict(FrameChannel& ch, const json& req) {
    const std::string id = req.value("session_id", "");
    const auto rec = store->find(id);
    if (!rec) fail(ErrorCode::not_found, "unknown session '" + id + "'");
    if (!rec->state.verdict) {
      fail(ErrorCode::not_found, "session '" + id + "' has no verdict" +
                                     (rec->state.aborted() ? " (aborted: " + rec->state.error + ")" : ""));
    }
    ch.send(Frame::text(MsgType::verdict, verdict_document(*rec, *store->session_report(id)).dump()));
  }
};

VerifierService::VerifierService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

VerifierService::~VerifierService() { stop(); }

void VerifierService::start() {
  if (impl_->running) return;
  impl_->listener = std::make_unique<Listener>(impl_->cfg.listen);
  impl_->running = true;
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

void VerifierService::stop() {
  if (!impl_ || !impl_->running.exchange(false)) return;
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  impl_->listener->close();
  {
    std::lock_guard lock(impl_->mutex);
    for (int fd : impl_->live_fds) ::shutdown(fd, SHUT_RDWR);
  }
  impl_->reap(true);
}

std::uint16_t VerifierService::port() const noexcept {
  return impl_->listener ? impl_->listener->port() : 0;
}

Endpoint VerifierService::endpoint() const { return Endpoint{impl_->cfg.listen.host, port()}; }

SessionStore& VerifierService::store() noexcept { return *impl_->store; }

TestReport VerifierService::replay(const std::string& session_id) const {
  const auto rec = impl_->store->find(session_id);
  if (!rec) fail(ErrorCode::not_found, "unknown session '" + session_id + "'");
  const auto bits = impl_->store->session_bits(session_id);
  if (!bits) fail(ErrorCode::not_found, "session '" + session_id + "' has no stored bits");
  const auto crit = impl_->cfg.criteria.find(rec->state.criteria_id);
  if (crit == impl_->cfg.criteria.end()) fail(ErrorCode::negotiation, "criteria no longer registered");
  return run_battery(*bits, crit->second);
}

}  // namespace qrng::net

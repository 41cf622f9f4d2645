#include <gtest/gtest.h>

#include <filesystem>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/net/device_client.hpp"
#include "qrng/net/verifier_service.hpp"
#include "qrng/sequence_codec.hpp"
#include "support/oracles.hpp"

using namespace qrng;
using namespace qrng::net;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kBits = 40'000;

BatteryConfig quick_battery() {
  BatteryConfig b;
  b.min_bits = 0;
  return b;
}

class Loopback : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("qrng-net-" + std::to_string(rd()) + std::to_string(rd()));
    cfg_.storage = dir_;
    cfg_.io_timeout = 5;
    cfg_.criteria = {{"default", BatteryConfig{}}, {"quick", quick_battery()}};
  }
  void TearDown() override {
    service_.reset();
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  void start() {
    service_ = std::make_unique<VerifierService>(cfg_);
    service_->start();
  }
  Endpoint ep() const { return service_->endpoint(); }
  SubmitOptions opts() const {
    SubmitOptions o;
    o.criteria_id = "quick";
    o.timeout = 30;
    o.chunk_bytes = 1000;
    return o;
  }
  static ErrorCode code_of(auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no qrng::Error thrown";
    return ErrorCode::internal_consistency;
  }
  FrameChannel raw() const { return FrameChannel(Socket::connect(ep(), 5)); }
  static Frame start_frame(const json& body) { return Frame::text(MsgType::session_start, body.dump()); }

  fs::path dir_;
  ServiceConfig cfg_;
  std::unique_ptr<VerifierService> service_;
};

}  // namespace

TEST_F(Loopback, VerdictEqualsLocalBattery) {
  start();
  std::mt19937_64 rng(71);
  for (int t = 0; t < 3; ++t) {
    const auto q2 = oracle::random_bits(kBits + t, rng);
    const auto res = device_submit(ep(), q2, opts());
    const auto local = run_battery(q2, quick_battery());
    EXPECT_EQ(res.report, local);
    EXPECT_EQ(res.pass, local.verdict());
    EXPECT_EQ(res.session_id.size(), 32u);
    // The verdict reaches the client just before the server logs the close.
    std::optional<SessionRecord> rec;
    for (int i = 0; i < 200; ++i) {
      rec = service_->store().find(res.session_id);
      if (rec && rec->state.phase == Phase::closed) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->state.phase, Phase::closed);
    EXPECT_EQ(rec->state.received_len, q2.size());
    EXPECT_EQ(*service_->store().session_bits(res.session_id), q2);
  }
}

TEST_F(Loopback, AllZerosFails) {
  start();
  const auto res = device_submit(ep(), BitString(kBits), opts());
  EXPECT_FALSE(res.pass);
  EXPECT_FALSE(res.report.battery_pass);
  const json doc = json::parse(fetch_verdict(ep(), res.session_id, "reader-token"));
  EXPECT_EQ(doc["verdict"], "fail");
}

TEST_F(Loopback, DefaultCriteriaEnforceMinimumLength) {
  start();
  std::mt19937_64 rng(72);
  auto o = opts();
  o.criteria_id = "default";
  EXPECT_EQ(code_of([&] { device_submit(ep(), oracle::random_bits(kBits, rng), o); }), ErrorCode::insufficient_data);
}

TEST_F(Loopback, IncompleteStreamAbortsWithoutVerdict) {
  start();
  std::string id;
  {
    auto ch = raw();
    ch.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "submit"},
                         {"criteria_id", "default"}, {"declared_len", 1'000'000}}));
    const auto ack = ch.receive();
    ASSERT_TRUE(ack);
    ASSERT_EQ(ack->type, MsgType::session_start);
    id = json::parse(ack->body())["session_id"];
    ch.send(Frame{MsgType::data, std::vector<std::uint8_t>(125, 0x5a)});
  }
  // Closing the socket ends the stream after 1000 of 10^6 bits.
  std::optional<SessionRecord> rec;
  for (int i = 0; i < 200; ++i) {
    rec = service_->store().find(id);
    if (rec && rec->state.aborted()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ASSERT_TRUE(rec);
  EXPECT_TRUE(rec->state.aborted());
  EXPECT_NE(rec->state.error.find("incomplete stream"), std::string::npos);
  EXPECT_FALSE(rec->state.verdict);
  EXPECT_EQ(code_of([&] { fetch_verdict(ep(), id, "reader-token"); }), ErrorCode::not_found);
}

TEST_F(Loopback, VerifyBeforeCompleteIsIncomplete) {
  start();
  auto ch = raw();
  ch.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "submit"},
                       {"criteria_id", "quick"}, {"declared_len", 5000}}));
  ASSERT_EQ(ch.receive()->type, MsgType::session_start);
  ch.send(Frame{MsgType::data, std::vector<std::uint8_t>(100, 1)});
  ch.send(Frame{MsgType::verify_request, {}});
  const auto err = ch.receive();
  ASSERT_TRUE(err);
  ASSERT_EQ(err->type, MsgType::error);
  EXPECT_EQ(json::parse(err->body())["code"], "incomplete-stream");
}

TEST_F(Loopback, WrongMagicAbortsAndCloses) {
  start();
  auto ch = raw();
  ch.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "submit"},
                       {"criteria_id", "quick"}, {"declared_len", 800}}));
  const auto ack = ch.receive();
  ASSERT_TRUE(ack);
  const std::string id = json::parse(ack->body())["session_id"];
  auto bytes = encode_frame(Frame{MsgType::data, std::vector<std::uint8_t>(104, 0)});
  bytes[0] = 0x42;
  ch.socket().send_all(bytes);
  const auto err = ch.receive();
  ASSERT_TRUE(err);
  EXPECT_EQ(err->type, MsgType::error);
  EXPECT_EQ(json::parse(err->body())["code"], "protocol");
  EXPECT_FALSE(ch.receive());  // server closed the connection
  const auto rec = service_->store().find(id);
  ASSERT_TRUE(rec);
  EXPECT_TRUE(rec->state.aborted());
  EXPECT_FALSE(rec->state.verdict);
}

TEST_F(Loopback, OversizeFramesAreProtocolErrors) {
  cfg_.max_payload = 4096;
  start();
  std::mt19937_64 rng(73);
  auto o = opts();
  o.chunk_bytes = 8192;
  EXPECT_EQ(code_of([&] { device_submit(ep(), oracle::random_bits(kBits, rng), o); }), ErrorCode::protocol);
  auto ch = raw();
  ch.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "submit"},
                       {"criteria_id", "quick"}, {"declared_len", 100000}}));
  ASSERT_EQ(ch.receive()->type, MsgType::session_start);
  ch.send(Frame{MsgType::data, std::vector<std::uint8_t>(5000, 0)});
  const auto err = ch.receive();
  ASSERT_TRUE(err);
  EXPECT_EQ(err->type, MsgType::error);
}

TEST_F(Loopback, NegotiationAndAuthorizationErrors) {
  start();
  std::mt19937_64 rng(74);
  const auto q2 = oracle::random_bits(kBits, rng);
  auto o = opts();
  o.criteria_id = "nope";
  EXPECT_EQ(code_of([&] { device_submit(ep(), q2, o); }), ErrorCode::negotiation);
  o = opts();
  o.device_token = "forged";
  EXPECT_EQ(code_of([&] { device_submit(ep(), q2, o); }), ErrorCode::authorization);
  EXPECT_EQ(code_of([&] { device_submit(ep(), BitString{}, opts()); }), ErrorCode::parameter_domain);
}

TEST_F(Loopback, TransportErrorsWhenUnreachable) {
  start();
  Endpoint dead = ep();
  service_->stop();
  std::mt19937_64 rng(75);
  EXPECT_EQ(code_of([&] { device_submit(dead, oracle::random_bits(100, rng), opts()); }), ErrorCode::transport);
}

TEST_F(Loopback, AuditCommitRetrieveAndReconstruct) {
  start();
  std::mt19937_64 rng(76);
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < kBits; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
  const auto seqs = encode_clicks(ev, true);
  const auto res = device_submit(ep(), seqs.q2, opts(), &*seqs.audit);
  ASSERT_TRUE(res.pass) << report_to_json(res.report, 2);
  EXPECT_TRUE(res.audit_committed);
  const auto audit = audit_retrieve(ep(), res.session_id, "auditor-token");
  EXPECT_EQ(audit, *seqs.audit);
  EXPECT_EQ(audit ^ seqs.q2, seqs.q1);
  const auto rec = service_->store().find_audit(res.session_id);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->bits, kBits);
  EXPECT_GT(rec->retained_at, 0);

  EXPECT_EQ(code_of([&] { audit_retrieve(ep(), res.session_id, "reader-token"); }), ErrorCode::authorization);
  EXPECT_EQ(code_of([&] { audit_retrieve(ep(), res.session_id, "device-token"); }), ErrorCode::authorization);
  EXPECT_EQ(code_of([&] { audit_retrieve(ep(), "00000000000000000000000000000000", "auditor-token"); }),
            ErrorCode::not_found);
  const auto plain = device_submit(ep(), seqs.q2, opts());
  EXPECT_EQ(code_of([&] { audit_retrieve(ep(), plain.session_id, "auditor-token"); }), ErrorCode::not_found);
}

TEST_F(Loopback, AuditLengthMustMatchSession) {
  start();
  std::mt19937_64 rng(77);
  const auto q2 = oracle::random_bits(kBits, rng);
  const auto res = device_submit(ep(), q2, opts());
  auto ch = raw();
  ch.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "commit_audit"},
                       {"session_id", res.session_id}, {"declared_len", kBits - 1}}));
  const auto err = ch.receive();
  ASSERT_TRUE(err);
  EXPECT_EQ(err->type, MsgType::error);
}

TEST_F(Loopback, FrameCaptureNeverContainsPrivateSequence) {
  start();
  std::mt19937_64 rng(78);
  std::vector<std::uint8_t> captured;
  std::mutex m;
  auto o = opts();
  o.tap = [&](Direction, std::span<const std::uint8_t> bytes) {
    std::lock_guard lock(m);
    captured.insert(captured.end(), bytes.begin(), bytes.end());
  };
  std::vector<BitString> privates;
  for (int t = 0; t < 5; ++t) {
    std::vector<ClickEvent> ev;
    for (std::uint64_t i = 0; i < kBits; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
    const auto seqs = encode_clicks(ev, true);
    device_submit(ep(), seqs.q2, o, &*seqs.audit);
    privates.push_back(seqs.q1);
  }
  ASSERT_GT(captured.size(), 5 * kBits / 8);
  for (const auto& q1 : privates) {
    const auto bytes = q1.to_msb_bytes();
    for (std::size_t off = 0; off + 16 <= bytes.size(); off += 997) {
      const auto it = std::search(captured.begin(), captured.end(), bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(off + 16));
      ASSERT_EQ(it, captured.end()) << "private bytes on the wire at offset " << off;
    }
  }
}

TEST_F(Loopback, ConcurrentSessionsAreIndependent) {
  start();
  constexpr int kSessions = 6;
  std::vector<BitString> inputs;
  std::mt19937_64 rng(79);
  for (int i = 0; i < kSessions; ++i) inputs.push_back(oracle::random_bits(kBits + 8 * i, rng));
  std::vector<SubmitResult> results(kSessions);
  std::vector<std::thread> threads;
  for (int i = 0; i < kSessions; ++i)
    threads.emplace_back([&, i] { results[i] = device_submit(ep(), inputs[i], opts()); });
  for (auto& t : threads) t.join();
  for (int i = 0; i < kSessions; ++i) {
    EXPECT_EQ(results[i].report, run_battery(inputs[i], quick_battery()));
    EXPECT_EQ(*service_->store().session_bits(results[i].session_id), inputs[i]);
  }
}

TEST_F(Loopback, ReplayAndPersistenceAcrossRestart) {
  start();
  std::mt19937_64 rng(80);
  const auto q2 = oracle::random_bits(kBits, rng);
  const auto res = device_submit(ep(), q2, opts());
  EXPECT_EQ(service_->replay(res.session_id), res.report);
  const std::string verdict_before = fetch_verdict(ep(), res.session_id, "reader-token");
  service_.reset();
  start();
  EXPECT_EQ(service_->replay(res.session_id), res.report);
  EXPECT_EQ(fetch_verdict(ep(), res.session_id, "reader-token"), verdict_before);
  const json doc = json::parse(verdict_before);
  EXPECT_EQ(doc["session_id"], res.session_id);
  EXPECT_EQ(doc["criteria_id"], "quick");
  EXPECT_EQ(code_of([&] { service_->replay("ffffffffffffffffffffffffffffffff"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { fetch_verdict(ep(), res.session_id, "bad"); }), ErrorCode::authorization);
}

TEST_F(Loopback, BusyServiceRefusesExtraSessions) {
  cfg_.max_sessions = 1;
  start();
  auto hold = raw();
  hold.send(start_frame({{"role", "device"}, {"token", "device-token"}, {"action", "submit"},
                         {"criteria_id", "quick"}, {"declared_len", 1000}}));
  ASSERT_EQ(hold.receive()->type, MsgType::session_start);
  std::mt19937_64 rng(81);
  EXPECT_EQ(code_of([&] { device_submit(ep(), oracle::random_bits(1000, rng), opts()); }), ErrorCode::negotiation);
}

TEST(SessionStore, LogReplayRebuildsIndex) {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("qrng-store-" + std::to_string(rd()));
  std::mt19937_64 rng(82);
  const auto bits = oracle::random_bits(5000, rng);
  SessionState st;
  st.session_id = new_session_id();
  st.declared_len = bits.size();
  st.criteria_id = "quick";
  st.advance(SessionEvent::start);
  {
    SessionStore s(dir);
    s.open_session(st);
    s.store_bits(st.session_id, bits);
    s.store_verdict(st.session_id, run_battery(bits, quick_battery()));
    s.close_session(st.session_id);
    EXPECT_TRUE(s.store_audit(st.session_id, bits));
    EXPECT_FALSE(s.store_audit(st.session_id, bits));
  }
  SessionStore again(dir);
  const auto rec = again.find(st.session_id);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->state.phase, Phase::closed);
  EXPECT_EQ(*again.session_bits(st.session_id), bits);
  EXPECT_EQ(*again.session_report(st.session_id), run_battery(bits, quick_battery()));
  EXPECT_EQ(*again.audit_bits(st.session_id), bits);
  const auto blob = again.get_blob(rec->bits_ref);
  EXPECT_EQ(sha256_hex(blob), rec->bits_ref);
  EXPECT_EQ(sha256_hex(std::vector<std::uint8_t>{'a', 'b', 'c'}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}

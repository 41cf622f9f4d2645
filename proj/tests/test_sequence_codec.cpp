#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qrng/error.hpp"
#include "qrng/sequence_codec.hpp"
#include "support/oracles.hpp"

using namespace qrng;

namespace {

std::vector<ClickEvent> events_of(std::initializer_list<int> channels) {
  std::vector<ClickEvent> ev;
  std::uint64_t i = 0;
  for (int c : channels) ev.push_back({i++, static_cast<std::uint8_t>(c)});
  return ev;
}

ProbVector pv(double a, double b, double c, double d) {
  ProbVector p;
  p.p = {a, b, c, d};
  return p;
}

double h(double p) { return p <= 0 || p >= 1 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

}  // namespace

TEST(EncodeClicks, KetMapping) {
  auto s = encode_clicks(events_of({1}));
  EXPECT_EQ(s.q1.to_string(), "0");
  EXPECT_EQ(s.q2.to_string(), "1");
  s = encode_clicks(events_of({2}));
  EXPECT_EQ(s.q1.to_string(), "1");
  EXPECT_EQ(s.q2.to_string(), "0");
  s = encode_clicks(events_of({0, 3, 1}));
  EXPECT_EQ(s.q1.to_string(), "010");
  EXPECT_EQ(s.q2.to_string(), "011");
  EXPECT_EQ(s.length(), 3u);
  EXPECT_FALSE(s.audit.has_value());
}

TEST(EncodeClicks, OutOfRangeChannelIsEncodingError) {
  try {
    encode_clicks(events_of({0, 4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::encoding);
  }
}

TEST(EncodeClicks, BijectionWithDecode) {
  std::mt19937_64 rng(7);
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < 5000; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
  const auto s = encode_clicks(ev, true);
  for (std::size_t i = 0; i < ev.size(); ++i) ASSERT_EQ(decode_channel(s.q1[i], s.q2[i]), ev[i].channel);
  for (int c = 0; c < 4; ++c) {
    const auto one = encode_clicks(events_of({c}));
    EXPECT_EQ(decode_channel(one.q1[0], one.q2[0]), c);
  }
}

TEST(EncodeClicks, AppendEqualsOneShot) {
  std::mt19937_64 rng(8);
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < 3000; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
  const auto whole = encode_clicks(ev, true);
  PairedSequences parts;
  parts.audit = BitString{};
  for (std::size_t pos = 0; pos < ev.size(); pos += 777) {
    const std::size_t n = std::min<std::size_t>(777, ev.size() - pos);
    encode_append(parts, std::span<const ClickEvent>(ev.data() + pos, n));
  }
  EXPECT_EQ(parts.q1, whole.q1);
  EXPECT_EQ(parts.q2, whole.q2);
  EXPECT_EQ(*parts.audit, *whole.audit);
}

TEST(Audit, XorInvolutionReconstructsPrivate) {
  EXPECT_TRUE(audit_stream({BitString::from_string("0"), BitString::from_string("1"), std::nullopt})[0]);
  EXPECT_FALSE(audit_stream({BitString::from_string("1"), BitString::from_string("1"), std::nullopt})[0]);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = rng() % 2000;
    PairedSequences s{oracle::random_bits(n, rng), oracle::random_bits(n, rng), std::nullopt};
    const auto a = audit_stream(s);
    ASSERT_EQ(a.size(), n);
    EXPECT_EQ(a ^ s.q2, s.q1);
  }
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < 999; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
  const auto s = encode_clicks(ev, true);
  EXPECT_EQ(*s.audit, audit_stream(s));
}

TEST(BinaryEntropy, Values) {
  EXPECT_DOUBLE_EQ(binary_entropy(0.5), 1.0);
  EXPECT_DOUBLE_EQ(binary_entropy(0.0), 0.0);
  EXPECT_DOUBLE_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.52), 0.9988455, 1e-6);
  EXPECT_THROW(binary_entropy(-0.01), Error);
  EXPECT_THROW(binary_entropy(1.01), Error);
}

TEST(EntropyDistance, Examples) {
  EXPECT_NEAR(entropy_distance(pv(0.25, 0.25, 0.25, 0.25)), 0.0, 1e-15);
  EXPECT_NEAR(entropy_distance(pv(0.24, 0.26, 0.26, 0.24)), 0.0, 1e-15);
  EXPECT_NEAR(entropy_distance(pv(0.26, 0.26, 0.24, 0.24)), 0.0011547, 1e-6);
  EXPECT_NEAR(entropy_distance(pv(0.26, 0.26, 0.24, 0.24)), std::abs(h(0.48) - h(0.5)), 1e-12);
}

TEST(EntropyDistance, SymmetriesAndBound) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.24, 0.26);
  for (int t = 0; t < 2000; ++t) {
    double a = u(rng), b = u(rng), c = u(rng);
    double d = 1 - a - b - c;
    if (d < 0) continue;
    const auto p = pv(a, b, c, d);
    const auto swapped = pv(d, c, b, a);
    EXPECT_NEAR(entropy_distance(p), entropy_distance(swapped), 1e-14);
    EXPECT_NEAR(entropy_distance(pv(a, b, b, 1 - a - 2 * b)), 0.0, 1e-14);
    const double lo = std::min(p.private_one(), p.public_one());
    const double hi = std::max(p.private_one(), p.public_one());
    EXPECT_LE(entropy_distance(p), max_entropy_distance(lo, hi) + 1e-15);
  }
}

TEST(MaxEntropyDistance, Examples) {
  EXPECT_NEAR(max_entropy_distance(0.5, 0.5), 0.0, 1e-15);
  EXPECT_NEAR(max_entropy_distance(0.4, 0.6), 0.029049, 1e-5);
  EXPECT_NEAR(max_entropy_distance(0.4, 0.6), 1 - h(0.6), 1e-12);
  EXPECT_NEAR(max_entropy_distance(0.48, 0.52), 0.0011547, 1e-6);
  EXPECT_NEAR(max_entropy_distance(0.1, 0.3), h(0.3) - h(0.1), 1e-12);
  EXPECT_NEAR(max_entropy_distance(0.45, 0.9), 1 - h(0.9), 1e-12);
  EXPECT_THROW(max_entropy_distance(0.6, 0.4), Error);
}

TEST(MaxEntropyDistance, MatchesGridSearch) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    double best = 0;
    double hmin = 2, hmax = -1;
    for (int i = 0; i <= 2000; ++i) {
      const double v = h(lo + (hi - lo) * i / 2000.0);
      hmin = std::min(hmin, v);
      hmax = std::max(hmax, v);
    }
    best = hmax - hmin;
    EXPECT_NEAR(max_entropy_distance(lo, hi), best, 1e-5);
    EXPECT_GE(max_entropy_distance(lo, hi), best - 1e-15);
  }
}

TEST(MutualInformation, IdenticalAndComplementedSequences) {
  std::mt19937_64 rng(13);
  const auto q = oracle::random_bits(100000, rng);
  const double hq = h(static_cast<double>(q.count_ones()) / static_cast<double>(q.size()));
  EXPECT_NEAR(mutual_information_estimate({q, q, std::nullopt}), hq, 1e-9);
  BitString notq = q ^ BitString::from_string(std::string(q.size(), '1'));
  EXPECT_NEAR(mutual_information_estimate({q, notq, std::nullopt}), hq, 1e-9);
  EXPECT_NEAR(hq, 1.0, 1e-3);
}

TEST(MutualInformation, IndependentUniformIsBelowThreshold) {
  std::mt19937_64 rng(14);
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < 1'000'000; ++i) ev.push_back({i, static_cast<std::uint8_t>(rng() % 4)});
  const auto s = encode_clicks(ev);
  const double mi = mutual_information_estimate(s);
  EXPECT_GE(mi, 0.0);
  EXPECT_LT(mi, 1e-4);
  EXPECT_LT(mi, mutual_information_threshold(s.length()));
  EXPECT_NEAR(mutual_information_threshold(1'000'000), 10.0 / (2e6 * std::log(2.0)), 1e-15);
}

TEST(MutualInformation, MatchesDirectJointComputation) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng() % 500;
    PairedSequences s{oracle::random_bits(n, rng), oracle::random_bits(n, rng), std::nullopt};
    double c[2][2] = {};
    for (std::size_t i = 0; i < n; ++i) c[s.q1[i]][s.q2[i]] += 1.0 / static_cast<double>(n);
    double mi = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (c[a][b] > 0) mi += c[a][b] * std::log2(c[a][b] / ((c[a][0] + c[a][1]) * (c[0][b] + c[1][b])));
    EXPECT_NEAR(mutual_information_estimate(s), std::max(0.0, mi), 1e-12);
  }
}

TEST(EmpiricalProbs, CountsChannels) {
  const auto s = encode_clicks(events_of({0, 1, 1, 2, 3, 3, 3, 3}));
  const auto p = empirical_probs(s);
  EXPECT_DOUBLE_EQ(p.p[0], 1.0 / 8);
  EXPECT_DOUBLE_EQ(p.p[1], 2.0 / 8);
  EXPECT_DOUBLE_EQ(p.p[2], 1.0 / 8);
  EXPECT_DOUBLE_EQ(p.p[3], 4.0 / 8);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "qrng/error.hpp"
#include "qrng/optics_sim.hpp"
#include "qrng/photon_stats.hpp"

using namespace qrng;

namespace {

SchemeConfig base(Scheme scheme = Scheme::spatial, double mu = 0.1) {
  SchemeConfig c;
  c.scheme = scheme;
  c.noise.mu = mu;
  c.drift.mode = DriftMode::none;
  c.seed = 42;
  return c;
}

std::vector<DetectionRecord> run_split(const SchemeConfig& c, std::vector<std::uint64_t> parts, unsigned threads) {
  Simulator sim(c, threads);
  std::vector<DetectionRecord> out;
  for (auto n : parts) sim.run(n, [&](std::span<const DetectionRecord> r) { out.insert(out.end(), r.begin(), r.end()); });
  return out;
}

bool same_records(const std::vector<DetectionRecord>& a, const std::vector<DetectionRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].pulse_index != b[i].pulse_index || a[i].mask != b[i].mask || a[i].timestamp != b[i].timestamp)
      return false;
  return true;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qrng::Error thrown";
  return ErrorCode::internal_consistency;
}

}  // namespace

TEST(Simulate, NoLightNoNoiseNeverClicks) {
  auto c = base(Scheme::spatial, 0.0);
  c.noise.dark_prob = 0.0;
  const auto sel = post_select(simulate(c, 200000));
  EXPECT_EQ(sel.histogram[0], 200000u);
  EXPECT_TRUE(sel.events.empty());
  c.scheme = Scheme::temporal;
  EXPECT_EQ(post_select(simulate(c, 50000)).histogram[0], 50000u);
}

TEST(Simulate, SingleClickFractionMatchesAnalytic) {
  const auto c = base();
  const std::uint64_t n = 1'000'000;
  const auto sel = post_select(simulate(c, n));
  const double p = click_prob(1, c.noise);
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
  EXPECT_NEAR(static_cast<double>(sel.histogram[1]) / n, p, 3 * se);
}

TEST(Simulate, DarkCountsAndEfficiencyMatchAnalyticHistogram) {
  auto c = base(Scheme::spatial, 0.33);
  c.noise.eta = 0.5;
  c.noise.dark_prob = 0.01;
  const std::uint64_t n = 1'000'000;
  const auto sel = post_select(simulate(c, n));
  const auto p = click_probs(c.noise);
  for (int k = 0; k <= 4; ++k) {
    const double pk = p[static_cast<std::size_t>(k)];
    const double se = std::sqrt(std::max(pk * (1 - pk), 1e-12) / static_cast<double>(n));
    EXPECT_NEAR(static_cast<double>(sel.histogram[static_cast<std::size_t>(k)]) / n, pk, 3 * se + 1e-7) << "k=" << k;
  }
}

TEST(Simulate, MultiClickRatioMatchesAnalytic) {
  const auto c = base();
  const auto sel = post_select(simulate(c, 1'000'000));
  const double h1 = static_cast<double>(sel.histogram[1]);
  const double h2 = static_cast<double>(sel.histogram[2]);
  const double r = h2 / h1;
  const double se = r * std::sqrt(1 / h1 + 1 / h2);
  EXPECT_NEAR(r, click_prob(2, c.noise) / click_prob(1, c.noise), 3 * se);
}

TEST(Simulate, ChannelFrequenciesConvergeToConditionedDistribution) {
  auto c = base();
  c.channel_probs.p = {0.4, 0.3, 0.2, 0.1};
  const auto sel = post_select(simulate(c, 1'000'000));
  // eta = 1, no dark counts: a single click on c means every photon went to c.
  std::array<double, 4> w{};
  double z = 0;
  for (int i = 0; i < 4; ++i) z += w[i] = std::exp(c.noise.mu * c.channel_probs.p[i]) - 1;
  std::array<double, 4> cnt{};
  for (const auto& e : sel.events) cnt[e.channel] += 1;
  const double n = static_cast<double>(sel.events.size());
  for (int i = 0; i < 4; ++i) {
    const double p = w[i] / z;
    EXPECT_NEAR(cnt[i] / n, p, 3 * std::sqrt(p * (1 - p) / n)) << "channel " << i;
  }
}

TEST(Simulate, DeterministicAndIndependentOfSplittingAndThreads) {
  for (Scheme s : {Scheme::spatial, Scheme::temporal}) {
    auto c = base(s, 0.3);
    c.noise.dark_prob = 0.01;
    c.drift.mode = DriftMode::ou_walk;
    c.drift.correlation_time = 0.01;
    const std::uint64_t n = 3 * kSimChunk + 1234;
    const auto ref = run_split(c, {n}, 1);
    EXPECT_TRUE(same_records(ref, run_split(c, {n}, 1)));
    EXPECT_TRUE(same_records(ref, run_split(c, {n}, 3)));
    EXPECT_TRUE(same_records(ref, run_split(c, {1, kSimChunk - 1, 5000, n - kSimChunk - 5000}, 2)));
    EXPECT_TRUE(same_records(ref, run_split(c, {777, 65536, 100000, n - 777 - 65536 - 100000}, 4)));
    auto other = c;
    other.seed = 43;
    EXPECT_FALSE(same_records(ref, run_split(other, {n}, 1)));
  }
}

TEST(Simulate, RecordsCarryPulseIndexAndTimestamp) {
  auto c = base(Scheme::temporal, 0.5);
  const auto recs = simulate(c, 10000);
  ASSERT_EQ(recs.size(), 10000u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].pulse_index, i);
    const double t0 = static_cast<double>(i) / c.pulse_rate;
    if (recs[i].mask == 0) {
      EXPECT_DOUBLE_EQ(recs[i].timestamp, t0);
    } else {
      const double t = t0 + std::countr_zero(recs[i].mask) * c.bin_spacing;
      EXPECT_DOUBLE_EQ(recs[i].timestamp, t);
    }
  }
}

TEST(Simulate, TemporalRejectsBinSpacingBelowDeadTime) {
  auto c = base(Scheme::temporal);
  c.bin_spacing = 20e-9;
  c.dead_time = 25e-9;
  EXPECT_EQ(code_of([&] { Simulator s(c); }), ErrorCode::config);
  c.bin_spacing = 100e-9;  // 4 bins no longer fit in 333 ns
  EXPECT_EQ(code_of([&] { Simulator s(c); }), ErrorCode::config);
}

TEST(Simulate, RejectsInvalidConfigs) {
  auto c = base();
  c.channel_probs.p = {0.5, 0.5, 0.5, -0.5};
  EXPECT_EQ(code_of([&] { Simulator s(c); }), ErrorCode::parameter_domain);
  c = base();
  c.drift.amplitude = 0.5;
  EXPECT_EQ(code_of([&] { Simulator s(c); }), ErrorCode::parameter_domain);
  c = base();
  c.noise.eta = 2;
  EXPECT_EQ(code_of([&] { Simulator s(c); }), ErrorCode::parameter_domain);
}

TEST(Simulate, TemporalMatchesSpatialAtLowMu) {
  const std::uint64_t n = 2'000'000;
  auto sp = base(Scheme::spatial, 0.01);
  auto tp = base(Scheme::temporal, 0.01);
  tp.seed = 99;
  const auto a = post_select(simulate(sp, n));
  const auto b = post_select(simulate(tp, n));
  const double pa = static_cast<double>(a.histogram[1]) / n;
  const double pb = static_cast<double>(b.histogram[1]) / n;
  const double se = std::sqrt(pa * (1 - pa) / n + pb * (1 - pb) / n);
  EXPECT_NEAR(pa, pb, 3 * se);
  const double p = click_prob(1, tp.noise);
  EXPECT_NEAR(pb, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Simulate, TemporalSinglePhotonSuffersNoDeadTime) {
  // With bin spacing above the dead time, only a click from the previous
  // pulse could be suppressed, and the pulse period makes that impossible.
  auto c = base(Scheme::temporal, 0.2);
  const auto recs = simulate(c, 300000);
  for (const auto& r : recs) {
    const int clicks = std::popcount(r.mask);
    if (r.photons == 1) EXPECT_EQ(clicks, 1);
    EXPECT_LE(clicks, r.photons);
  }
}

TEST(DeadTime, SuppressesClicksInsideTheWindow) {
  double last = -1.0;
  EXPECT_EQ(apply_dead_time(0b0011, 0.0, 10e-9, 25e-9, last), 0b0001);
  EXPECT_DOUBLE_EQ(last, 0.0);
  last = -1.0;
  EXPECT_EQ(apply_dead_time(0b0101, 0.0, 10e-9, 25e-9, last), 0b0001);
  last = -1.0;
  EXPECT_EQ(apply_dead_time(0b1001, 0.0, 10e-9, 25e-9, last), 0b1001);
  EXPECT_DOUBLE_EQ(last, 30e-9);
  last = -1.0;
  EXPECT_EQ(apply_dead_time(0b1111, 0.0, 50e-9, 25e-9, last), 0b1111);
  last = 1e-6 - 10e-9;
  EXPECT_EQ(apply_dead_time(0b0001, 1e-6, 50e-9, 25e-9, last), 0);
}

TEST(Drift, ProbabilitiesStayValid) {
  for (DriftMode m : {DriftMode::ou_walk, DriftMode::sinusoid}) {
    auto c = base();
    c.drift.mode = m;
    c.drift.amplitude = 0.2;
    c.drift.correlation_time = 0.05;
    Simulator sim(c);
    double max_dev = 0;
    for (std::uint64_t pulse = 0; pulse < 3'000'000; pulse += 1777) {
      const auto p = sim.probs_at(pulse);
      double s = 0;
      for (int i = 0; i < 4; ++i) {
        EXPECT_GE(p.p[i], 0.0);
        s += p.p[i];
        max_dev = std::max(max_dev, std::abs(p.p[i] - 0.25));
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_GT(max_dev, 0.0) << to_string(m);
    // Renormalizing weights within +-a can stretch a deviation to 2a/(1-a).
    EXPECT_LE(max_dev, 0.25 * 2 * 0.2 / 0.8 + 1e-12) << to_string(m);
  }
}

TEST(Drift, NoneKeepsNominalProbabilities) {
  auto c = base();
  c.channel_probs.p = {0.1, 0.2, 0.3, 0.4};
  Simulator sim(c);
  for (std::uint64_t pulse : {0ull, 12345ull, 99999999ull}) EXPECT_EQ(sim.probs_at(pulse).p, c.channel_probs.p);
}

TEST(PostSelect, Definition) {
  std::vector<DetectionRecord> r{{0, 0b0001, 0, 1}, {1, 0b0011, 0, 2}, {2, 0, 0, 0}, {3, 0b1000, 0, 1}};
  const auto sel = post_select(r);
  ASSERT_EQ(sel.events.size(), 2u);
  EXPECT_EQ(sel.events[0], (ClickEvent{0, 0}));
  EXPECT_EQ(sel.events[1], (ClickEvent{3, 3}));
  EXPECT_EQ(sel.histogram[0], 1u);
  EXPECT_EQ(sel.histogram[1], 2u);
  EXPECT_EQ(sel.histogram[2], 1u);
  std::vector<DetectionRecord> empty(500);
  const auto e = post_select(empty);
  EXPECT_TRUE(e.events.empty());
  EXPECT_EQ(e.histogram[0], 500u);
}

TEST(StabilityTrace, ConstantRateIsExactlyOne) {
  std::vector<double> ts;
  for (int w = 0; w < 50; ++w)
    for (int k = 0; k < 7; ++k) ts.push_back(w * 1e-3 + k * 1e-4 + 1e-5);
  const auto tr = stability_trace(ts, 1e-3, 1, 50e-3);
  ASSERT_EQ(tr.size(), 50u);
  for (double v : tr) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(StabilityTrace, StepChangeShowsUp) {
  std::vector<ClickEvent> ev;
  const double rate = 1e6;
  for (std::uint64_t p = 0; p < 2'000'000; p += (p < 1'000'000 ? 110 : 100)) ev.push_back({p, 0});
  const auto tr = stability_trace(ev, rate, 1e-3, 10, 2.0);
  ASSERT_EQ(tr.size(), 200u);
  EXPECT_NEAR(tr.back() - tr.front(), 0.10, 0.01);
}

TEST(StabilityTrace, EmptyAndInvalidInputs) {
  EXPECT_TRUE(stability_trace(std::span<const double>{}, 1e-3, 10).empty());
  std::vector<double> ts{0.1};
  EXPECT_EQ(code_of([&] { stability_trace(ts, 0.0, 1); }), ErrorCode::parameter_domain);
  EXPECT_EQ(code_of([&] { stability_trace(ts, 1e-3, 0); }), ErrorCode::parameter_domain);
}

TEST(StabilityTrace, IncompleteGroupsDropped) {
  std::vector<double> ts;
  for (int i = 0; i < 1050; ++i) ts.push_back(i * 1e-3 + 5e-4);
  EXPECT_EQ(stability_trace(ts, 1e-3, 100, 1.05).size(), 10u);
}

TEST(BalanceGate, Examples) {
  const std::array<std::uint64_t, 4> uniform{25, 25, 25, 25};
  EXPECT_TRUE(balance_gate(std::span<const std::uint64_t, 4>(uniform), 0.24, 0.26).accepted);
  const std::array<std::uint64_t, 4> skew{30, 24, 23, 23};
  const auto d = balance_gate(std::span<const std::uint64_t, 4>(skew), 0.24, 0.26);
  EXPECT_FALSE(d.accepted);
  EXPECT_DOUBLE_EQ(d.frequencies[0], 0.30);
  const std::array<std::uint64_t, 4> edge{26, 25, 25, 24};
  EXPECT_TRUE(balance_gate(std::span<const std::uint64_t, 4>(edge), 0.24, 0.26).accepted);
  const std::array<std::uint64_t, 4> none{0, 0, 0, 0};
  const auto z = balance_gate(std::span<const std::uint64_t, 4>(none), 0.24, 0.26);
  EXPECT_FALSE(z.accepted);
  EXPECT_EQ(z.reason, "no events");
}

TEST(BalanceGate, EventOverloadCountsChannels) {
  std::vector<ClickEvent> ev;
  for (std::uint64_t i = 0; i < 100; ++i) ev.push_back({i, static_cast<std::uint8_t>(i % 4)});
  const auto d = balance_gate(ev, 0.24, 0.26);
  EXPECT_TRUE(d.accepted);
  EXPECT_EQ(d.events, 100u);
  EXPECT_FALSE(balance_gate(std::span<const ClickEvent>{}, 0.24, 0.26).accepted);
}

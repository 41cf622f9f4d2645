#include "qrng/optics_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "qrng/error.hpp"

namespace qrng {
namespace {

inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32),
                    0x51524e47u};
  return std::mt19937_64(seq);
}

std::mt19937_64 drift_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x44524654u};
  return std::mt19937_64(seq);
}

using Cumulative = std::array<double, kOutcomes>;

Cumulative cumulative(const std::array<double, kOutcomes>& w) {
  Cumulative c{};
  double acc = 0.0;
  for (int i = 0; i < kOutcomes; ++i) c[i] = (acc += w[i]);
  c[kOutcomes - 1] = std::numeric_limits<double>::infinity();
  return c;
}

}  // namespace

void ProbVector::validate() const {
  double sum = 0.0;
  for (double x : p) {
    require(x >= 0.0 && x <= 1.0, ErrorCode::parameter_domain, "probabilities must lie in [0,1]");
    sum += x;
  }
  require(std::fabs(sum - 1.0) <= 1e-12, ErrorCode::parameter_domain, "probabilities must sum to 1");
}

std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::spatial ? "spatial" : "temporal";
}

std::string_view to_string(DriftMode m) noexcept {
  switch (m) {
    case DriftMode::none: return "none";
    case DriftMode::ou_walk: return "ou_walk";
    case DriftMode::sinusoid: return "sinusoid";
  }
  return "none";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "spatial") return Scheme::spatial;
  if (text == "temporal") return Scheme::temporal;
  fail(ErrorCode::config, "unknown scheme '" + std::string(text) + "'");
}

DriftMode parse_drift_mode(std::string_view text) {
  if (text == "none") return DriftMode::none;
  if (text == "ou_walk") return DriftMode::ou_walk;
  if (text == "sinusoid") return DriftMode::sinusoid;
  fail(ErrorCode::config, "unknown drift mode '" + std::string(text) + "'");
}

void DriftConfig::validate() const {
  require(amplitude >= 0.0 && amplitude < 0.5, ErrorCode::parameter_domain,
          "drift amplitude must lie in [0, 0.5)");
  require(correlation_time > 0.0, ErrorCode::parameter_domain, "drift correlation time must be > 0");
  require(step > 0.0, ErrorCode::parameter_domain, "drift step must be > 0");
}

void SchemeConfig::validate() const {
  require(pulse_rate > 0.0 && std::isfinite(pulse_rate), ErrorCode::parameter_domain,
          "pulse rate must be > 0");
  channel_probs.validate();
  noise.validate();
  require(noise.channels == kOutcomes, ErrorCode::parameter_domain,
          "the simulated schemes have exactly 4 channels");
  drift.validate();
  if (scheme == Scheme::temporal) {
    require(dead_time >= 0.0, ErrorCode::parameter_domain, "dead time must be >= 0");
    require(bin_spacing > dead_time, ErrorCode::config,
            "temporal bin spacing must exceed the detector dead time");
    require(4.0 * bin_spacing < 1.0 / pulse_rate, ErrorCode::config,
            "four temporal bins must fit inside one pulse period");
  }
}

std::uint8_t apply_dead_time(std::uint8_t mask, double pulse_time, double bin_spacing,
                             double dead_time, double& last_click) {
  std::uint8_t kept = 0;
  for (int b = 0; b < kOutcomes; ++b) {
    if (!(mask & (1u << b))) continue;
    const double t = pulse_time + b * bin_spacing;
    if (t - last_click < dead_time) continue;
    kept |= static_cast<std::uint8_t>(1u << b);
    last_click = t;
  }
  return kept;
}

struct Simulator::Impl {
  SchemeConfig cfg;
  unsigned threads = 1;
  std::uint64_t done = 0;

  std::vector<double> photon_cdf;
  int cutoff = 0;

  std::uint64_t pulses_per_step = 1;
  std::vector<Cumulative> drift_table;
  std::vector<std::array<double, kOutcomes>> drift_probs;
  std::mt19937_64 drift_gen;
  std::array<double, kOutcomes> ou_state{};

  std::mt19937_64 rng;  // current chunk; valid when done % kSimChunk != 0

  explicit Impl(SchemeConfig c, unsigned t) : cfg(std::move(c)), threads(std::max(1u, t)) {
    cfg.validate();
    cutoff = effective_truncation(cfg.noise);
    photon_cdf.resize(static_cast<std::size_t>(cutoff) + 1);
    double acc = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
      acc += cfg.noise.mu == 0.0 ? (n == 0 ? 1.0 : 0.0)
                                 : std::exp(-cfg.noise.mu + n * std::log(cfg.noise.mu) - std::lgamma(n + 1.0));
      photon_cdf[static_cast<std::size_t>(n)] = acc;
    }
    photon_cdf.back() = std::numeric_limits<double>::infinity();
    pulses_per_step = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.drift.step * cfg.pulse_rate)));
    drift_gen = drift_rng(cfg.seed);
  }

  std::array<double, kOutcomes> drifted(std::uint64_t step) {
    const auto& base = cfg.channel_probs.p;
    const auto& d = cfg.drift;
    std::array<double, kOutcomes> dev{};
    switch (d.mode) {
      case DriftMode::none:
        return base;
      case DriftMode::sinusoid: {
        const double t = static_cast<double>(step) * d.step;
        for (int c = 0; c < kOutcomes; ++c) {
          dev[c] = d.amplitude * std::sin(2.0 * M_PI * t / d.correlation_time + c * M_PI / 2.0);
        }
        break;
      }
      case DriftMode::ou_walk: {
        if (step > 0) {
          // Exact OU update with stationary deviation amplitude / 3, clipped.
          const double decay = std::exp(-d.step / d.correlation_time);
          const double sd = d.amplitude / 3.0 * std::sqrt(1.0 - decay * decay);
          std::normal_distribution<double> normal(0.0, 1.0);
          for (auto& x : ou_state) {
            x = std::clamp(x * decay + sd * normal(drift_gen), -d.amplitude, d.amplitude);
          }
        }
        dev = ou_state;
        break;
      }
    }
    std::array<double, kOutcomes> w{};
    double sum = 0.0;
    for (int c = 0; c < kOutcomes; ++c) sum += (w[c] = base[c] * (1.0 + dev[c]));
    for (auto& x : w) x /= sum;
    return w;
  }

  void ensure_drift(std::uint64_t last_pulse) {
    const std::uint64_t need = cfg.drift.mode == DriftMode::none ? 0 : last_pulse / pulses_per_step;
    while (drift_table.size() <= need) {
      const auto w = drifted(drift_table.size());
      drift_probs.push_back(w);
      drift_table.push_back(cumulative(w));
    }
  }

  const Cumulative& weights_for(std::uint64_t pulse) const {
    if (cfg.drift.mode == DriftMode::none) return drift_table[0];
    return drift_table[pulse / pulses_per_step];
  }

  // Thread-safe given ensure_drift() has covered the range.
  void simulate_range(std::uint64_t first, std::uint64_t count, std::mt19937_64& gen,
                      std::vector<DetectionRecord>& out) const {
    const NoiseModel& noise = cfg.noise;
    const bool temporal = cfg.scheme == Scheme::temporal;
    const bool lossy = noise.eta < 1.0;
    const bool dark = noise.dark_prob > 0.0;
    double last_click = -std::numeric_limits<double>::infinity();
    out.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t pulse = first + i;
      const double u = u01(gen);
      int photons = 0;
      while (u >= photon_cdf[static_cast<std::size_t>(photons)]) ++photons;
      std::uint8_t mask = 0;
      if (photons > 0) {
        const Cumulative& cum = weights_for(pulse);
        for (int p = 0; p < photons; ++p) {
          if (lossy && u01(gen) >= noise.eta) continue;
          const double r = u01(gen);
          int c = 0;
          while (r >= cum[c]) ++c;
          mask |= static_cast<std::uint8_t>(1u << c);
        }
      }
      if (dark) {
        for (int c = 0; c < kOutcomes; ++c) {
          if (u01(gen) < noise.dark_prob) mask |= static_cast<std::uint8_t>(1u << c);
        }
      }
      double t = static_cast<double>(pulse) / cfg.pulse_rate;
      if (temporal && mask) {
        // Dead time cannot reach across pulses when the bins fit the period
        // with spacing > dead time, so chunks stay independent.
        mask = apply_dead_time(mask, t, cfg.bin_spacing, cfg.dead_time, last_click);
        if (mask) t += std::countr_zero(mask) * cfg.bin_spacing;
      }
      out[i] = DetectionRecord{pulse, mask, t, static_cast<std::uint16_t>(photons)};
    }
  }

  void run(std::uint64_t n, const Sink& sink) {
    if (n == 0) return;
    ensure_drift(done + n - 1);
    std::vector<DetectionRecord> buffer;
    while (n > 0) {
      const std::uint64_t offset = done % kSimChunk;
      if (offset == 0 && threads > 1 && n >= 2 * kSimChunk) {
        const std::uint64_t chunks = std::min<std::uint64_t>(threads, n / kSimChunk);
        std::vector<std::vector<DetectionRecord>> parts(chunks);
        std::vector<std::thread> pool;
        for (std::uint64_t c = 0; c < chunks; ++c) {
          pool.emplace_back([this, c, &parts] {
            const std::uint64_t first = done + c * kSimChunk;
            auto gen = chunk_rng(cfg.seed, first / kSimChunk);
            simulate_range(first, kSimChunk, gen, parts[c]);
          });
        }
        for (auto& t : pool) t.join();
        for (const auto& part : parts) sink(part);
        done += chunks * kSimChunk;
        n -= chunks * kSimChunk;
        continue;
      }
      if (offset == 0) rng = chunk_rng(cfg.seed, done / kSimChunk);
      const std::uint64_t take = std::min(n, kSimChunk - offset);
      simulate_range(done, take, rng, buffer);
      sink(buffer);
      done += take;
      n -= take;
    }
  }
};

Simulator::Simulator(SchemeConfig config, unsigned threads)
    : impl_(std::make_unique<Impl>(std::move(config), threads)) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

void Simulator::run(std::uint64_t n_pulses, const Sink& sink) { impl_->run(n_pulses, sink); }
std::uint64_t Simulator::pulses_done() const noexcept { return impl_->done; }
const SchemeConfig& Simulator::config() const noexcept { return impl_->cfg; }

ProbVector Simulator::probs_at(std::uint64_t pulse_index) {
  impl_->ensure_drift(pulse_index);
  const std::size_t step =
      impl_->cfg.drift.mode == DriftMode::none ? 0 : pulse_index / impl_->pulses_per_step;
  return ProbVector{impl_->drift_probs[step]};
}

std::vector<DetectionRecord> simulate(const SchemeConfig& config, std::uint64_t n_pulses) {
  Simulator sim(config);
  std::vector<DetectionRecord> out;
  out.reserve(n_pulses);
  sim.run(n_pulses, [&](std::span<const DetectionRecord> r) { out.insert(out.end(), r.begin(), r.end()); });
  return out;
}

void PostSelector::add(std::span<const DetectionRecord> records) {
  for (const auto& r : records) {
    const int k = std::popcount(static_cast<unsigned>(r.mask & 0x0f));
    ++result_.histogram[static_cast<std::size_t>(k)];
    if (k == 1) {
      result_.events.push_back(ClickEvent{r.pulse_index, static_cast<std::uint8_t>(std::countr_zero(r.mask))});
    }
  }
}

PostSelection post_select(std::span<const DetectionRecord> records) {
  PostSelector sel;
  sel.add(records);
  return sel.take();
}

namespace {

std::vector<double> normalize_trace(const std::vector<std::uint64_t>& counts, std::size_t group) {
  const std::size_t points = counts.size() / group;
  std::vector<double> trace(points);
  double grand = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    std::uint64_t sum = 0;
    for (std::size_t w = 0; w < group; ++w) sum += counts[p * group + w];
    trace[p] = static_cast<double>(sum) / static_cast<double>(group);
    grand += trace[p];
  }
  if (points == 0 || grand == 0.0) return trace;
  grand /= static_cast<double>(points);
  for (auto& x : trace) x /= grand;
  return trace;
}

}  // namespace

std::vector<double> stability_trace(std::span<const double> timestamps, double interval,
                                    std::size_t group, double duration) {
  require(interval > 0.0, ErrorCode::parameter_domain, "interval must be > 0");
  require(group >= 1, ErrorCode::parameter_domain, "group must be >= 1");
  if (timestamps.empty()) return {};
  if (duration <= 0.0) duration = *std::max_element(timestamps.begin(), timestamps.end());
  const auto windows = static_cast<std::size_t>(std::floor(duration / interval));
  std::vector<std::uint64_t> counts(windows, 0);
  for (double t : timestamps) {
    if (t < 0.0) continue;
    const auto w = static_cast<std::size_t>(std::floor(t / interval));
    if (w < windows) ++counts[w];
  }
  return normalize_trace(counts, group);
}

std::vector<double> stability_trace(std::span<const ClickEvent> events, double pulse_rate,
                                    double interval, std::size_t group, double duration) {
  require(interval > 0.0, ErrorCode::parameter_domain, "interval must be > 0");
  require(group >= 1, ErrorCode::parameter_domain, "group must be >= 1");
  require(pulse_rate > 0.0, ErrorCode::parameter_domain, "pulse rate must be > 0");
  if (events.empty()) return {};
  const double per_window = interval * pulse_rate;
  const double rounded = std::round(per_window);
  if (rounded >= 1.0 && std::fabs(per_window - rounded) < 1e-6) {
    // Integral pulses per window: bin on pulse indices to avoid float edges.
    const auto ppw = static_cast<std::uint64_t>(rounded);
    const std::uint64_t end_pulse = duration > 0.0
        ? static_cast<std::uint64_t>(std::llround(duration * pulse_rate))
        : events.back().pulse_index;
    const std::size_t windows = end_pulse / ppw;
    std::vector<std::uint64_t> counts(windows, 0);
    for (const auto& e : events) {
      const std::uint64_t w = e.pulse_index / ppw;
      if (w < windows) ++counts[w];
    }
    return normalize_trace(counts, group);
  }
  std::vector<double> ts;
  ts.reserve(events.size());
  for (const auto& e : events) ts.push_back(static_cast<double>(e.pulse_index) / pulse_rate);
  return stability_trace(ts, interval, group, duration);
}

GateDecision balance_gate(std::span<const std::uint64_t, kOutcomes> counts, double lo, double hi) {
  require(lo <= hi, ErrorCode::parameter_domain, "balance bounds must satisfy lo <= hi");
  GateDecision d;
  for (auto c : counts) d.events += c;
  if (d.events == 0) {
    d.reason = "no events";
    return d;
  }
  d.accepted = true;
  for (int c = 0; c < kOutcomes; ++c) {
    d.frequencies[c] = static_cast<double>(counts[c]) / static_cast<double>(d.events);
    if (d.frequencies[c] < lo || d.frequencies[c] > hi) {
      d.accepted = false;
      if (d.reason.empty()) d.reason = "channel " + std::to_string(c) + " outside balance bounds";
    }
  }
  return d;
}

GateDecision balance_gate(std::span<const ClickEvent> events, double lo, double hi) {
  std::array<std::uint64_t, kOutcomes> counts{};
  for (const auto& e : events) {
    require(e.channel < kOutcomes, ErrorCode::parameter_domain, "channel index out of range");
    ++counts[e.channel];
  }
  return balance_gate(std::span<const std::uint64_t, kOutcomes>(counts), lo, hi);
}

}  // namespace qrng

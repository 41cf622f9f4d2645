#pragma once

// Monte-Carlo model of the two multiplexed sources: a Poissonian pulse train
// split four ways, either onto four detectors (spatial) or onto four arrival
// time bins of one detector (temporal).

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrng/photon_stats.hpp"
#include "qrng/types.hpp"

namespace qrng {

enum class Scheme { spatial, temporal };
enum class DriftMode { none, ou_walk, sinusoid };

std::string_view to_string(Scheme s) noexcept;
std::string_view to_string(DriftMode m) noexcept;
Scheme parse_scheme(std::string_view text);
DriftMode parse_drift_mode(std::string_view text);

/// Slow multiplicative wander of the channel weights.
struct DriftConfig {
  DriftMode mode = DriftMode::ou_walk;
  double correlation_time = 10.0;  ///< seconds (OU time constant or sinusoid period)
  double amplitude = 0.05;         ///< max relative deviation, in [0, 0.5)
  double step = 1e-3;              ///< seconds between drift updates

  void validate() const;
};

struct SchemeConfig {
  Scheme scheme = Scheme::spatial;
  double pulse_rate = 3e6;
  ProbVector channel_probs;
  NoiseModel noise;
  double dead_time = 25e-9;
  double bin_spacing = 50e-9;
  DriftConfig drift;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Pulses per independently seeded RNG chunk.
inline constexpr std::uint64_t kSimChunk = std::uint64_t{1} << 16;

/// Removes clicks from a temporal-bin mask that fall within `dead_time` of
/// the preceding click. `last_click` is the absolute time of the previous
/// registered click and is updated in place.
std::uint8_t apply_dead_time(std::uint8_t mask, double pulse_time, double bin_spacing,
                             double dead_time, double& last_click);

/// Streaming simulator. Output is a pure function of the config and the
/// total number of pulses requested so far, independent of how requests are
/// split and of the thread count.
class Simulator {
 public:
  using Sink = std::function<void(std::span<const DetectionRecord>)>;

  explicit Simulator(SchemeConfig config, unsigned threads = 1);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  /// Simulates the next `n_pulses` pulses, handing records to `sink` in
  /// pulse order.
  void run(std::uint64_t n_pulses, const Sink& sink);

  std::uint64_t pulses_done() const noexcept;
  const SchemeConfig& config() const noexcept;

  /// Channel probabilities in force at `pulse_index` after drift.
  ProbVector probs_at(std::uint64_t pulse_index);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper collecting every record.
std::vector<DetectionRecord> simulate(const SchemeConfig& config, std::uint64_t n_pulses);

using ClickHistogram = std::array<std::uint64_t, kOutcomes + 1>;

struct PostSelection {
  std::vector<ClickEvent> events;
  ClickHistogram histogram{};  ///< records by number of clicked channels
};

/// Keeps exactly the single-click records, in pulse order.
PostSelection post_select(std::span<const DetectionRecord> records);

/// Incremental form of post_select for long runs.
class PostSelector {
 public:
  void add(std::span<const DetectionRecord> records);
  std::vector<ClickEvent>& events() noexcept { return result_.events; }
  const ClickHistogram& histogram() const noexcept { return result_.histogram; }
  PostSelection take() { return std::move(result_); }

 private:
  PostSelection result_;
};

/// Counts per `interval`-second window (windows start at t = 0, only whole
/// windows inside `duration`), averaged over consecutive blocks of `group`
/// windows and divided by the mean over all points. Incomplete trailing
/// groups are dropped. A non-positive `duration` uses the last timestamp.
std::vector<double> stability_trace(std::span<const double> timestamps, double interval,
                                    std::size_t group, double duration = 0.0);

std::vector<double> stability_trace(std::span<const ClickEvent> events, double pulse_rate,
                                    double interval, std::size_t group, double duration = 0.0);

struct GateDecision {
  bool accepted = false;
  std::array<double, kOutcomes> frequencies{};
  std::uint64_t events = 0;
  std::string reason;
};

/// Accepts iff every channel's relative frequency lies in [lo, hi].
GateDecision balance_gate(std::span<const std::uint64_t, kOutcomes> counts, double lo, double hi);
GateDecision balance_gate(std::span<const ClickEvent> events, double lo, double hi);

}  // namespace qrng

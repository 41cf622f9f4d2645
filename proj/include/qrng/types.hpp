#pragma once

#include <array>
#include <cstdint>

namespace qrng {

inline constexpr int kOutcomes = 4;

/// Outcome probabilities of the prepared state for |00>, |01>, |10>, |11>.
/// Channel c measures the ket whose two-bit binary value is c.
struct ProbVector {
  std::array<double, kOutcomes> p{0.25, 0.25, 0.25, 0.25};

  /// Entries in [0,1] summing to 1 within 1e-12; throws parameter_domain.
  void validate() const;

  /// P(private bit = 1) = p3 + p4.
  double private_one() const noexcept { return p[2] + p[3]; }
  /// P(public bit = 1) = p2 + p4.
  double public_one() const noexcept { return p[1] + p[3]; }
};

/// One laser pulse as seen by the detection electronics.
struct DetectionRecord {
  std::uint64_t pulse_index = 0;
  std::uint8_t mask = 0;       ///< bit c set when channel/bin c clicked
  double timestamp = 0.0;      ///< seconds
  std::uint16_t photons = 0;   ///< simulation ground truth; not persisted
};

/// A post-selected pulse with exactly one click.
struct ClickEvent {
  std::uint64_t pulse_index = 0;
  std::uint8_t channel = 0;

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

}  // namespace qrng

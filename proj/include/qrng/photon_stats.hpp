#pragma once

// Photon-counting statistics for a weak coherent source feeding an array of
// inefficient detectors with dark counts, and the resulting bound on how many
// bits can be extracted from the post-selected single clicks.

#include <cstdint>
#include <vector>

namespace qrng {

struct NoiseModel {
  double mu = 0.1;          ///< mean photon number per pulse (|alpha|^2)
  double eta = 1.0;         ///< per-photon detection efficiency
  double dark_prob = 0.0;   ///< dark-count probability per detector per window
  int channels = 4;         ///< detectors (spatial) or time bins (temporal)
  int truncation = 32;      ///< starting photon-number cutoff for Poisson sums

  /// Throws ErrorCode::parameter_domain on violation.
  void validate() const;
};

/// Poisson tail mass strictly above `cutoff`.
double poisson_tail(double mu, int cutoff);

/// Photon-number cutoff actually used: `model.truncation`, doubled until the
/// Poisson tail beyond it drops below 1e-12.
int effective_truncation(const NoiseModel& model);

/// Pr(k | N photons) for k = 0..channels.
std::vector<double> click_distribution(int photons, const NoiseModel& model);

/// Poisson-mixed click probability p(k).
double click_prob(int clicks, const NoiseModel& model);

/// p(k) for every k = 0..channels, sharing one pass over the photon numbers.
std::vector<double> click_probs(const NoiseModel& model);

/// Fraction of single clicks not caused by exactly one photon,
/// 1 - Pr(N=1 | k=1).
double qber(const NoiseModel& model);

struct ExtractionParams {
  std::uint64_t raw_len = 0;  ///< T, bits before extraction
  double qber = 0.0;          ///< Q
  double epsilon = 0.0;       ///< distance from uniform, in (0, 1)

  void validate() const;
};

/// floor(T (1 - Q) - 2 log2(1/eps)). Throws insufficient_entropy when the
/// result is not positive.
std::uint64_t extractable_length(const ExtractionParams& params);

/// extractable_length / T.
double compression_rate(const ExtractionParams& params);

}  // namespace qrng

#include "qrng/photon_stats.hpp"

#include <cmath>
#include <string>

#include "qrng/error.hpp"

namespace qrng {
namespace {

constexpr double kTailTolerance = 1e-12;
constexpr double kNegativeTolerance = 1e-9;
constexpr int kMaxTruncation = 1 << 14;

// Neumaier-compensated accumulator.
struct CompensatedSum {
  long double sum = 0.0L;
  long double carry = 0.0L;

  void add(long double x) {
    const long double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) carry += (sum - t) + x;
    else carry += (x - t) + sum;
    sum = t;
  }
  long double value() const { return sum + carry; }
};

long double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0L;
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return r;
}

double poisson_pmf(double mu, int n) {
  if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-mu + n * std::log(mu) - std::lgamma(n + 1.0));
}

double clamp_probability(long double raw, const char* what) {
  if (raw < -kNegativeTolerance || raw > 1.0L + kNegativeTolerance) {
    fail(ErrorCode::internal_consistency,
         std::string(what) + " left [0,1] beyond tolerance: " + std::to_string(static_cast<double>(raw)));
  }
  if (raw < 0.0L) return 0.0;
  if (raw > 1.0L) return 1.0;
  return static_cast<double>(raw);
}

}  // namespace

void NoiseModel::validate() const {
  require(std::isfinite(mu) && mu >= 0.0, ErrorCode::parameter_domain, "mu must be >= 0");
  require(eta >= 0.0 && eta <= 1.0, ErrorCode::parameter_domain, "eta must lie in [0,1]");
  require(dark_prob >= 0.0 && dark_prob < 1.0, ErrorCode::parameter_domain,
          "dark_prob must lie in [0,1)");
  require(channels >= 1, ErrorCode::parameter_domain, "channels must be >= 1");
  require(truncation >= 1, ErrorCode::parameter_domain, "truncation must be >= 1");
}

double poisson_tail(double mu, int cutoff) {
  if (mu == 0.0) return 0.0;
  double tail = 0.0;
  for (int n = cutoff + 1;; ++n) {
    const double term = poisson_pmf(mu, n);
    tail += term;
    if (n > mu && (term == 0.0 || term < 1e-18 * tail)) break;
  }
  return tail;
}

int effective_truncation(const NoiseModel& model) {
  model.validate();
  int cutoff = model.truncation;
  while (poisson_tail(model.mu, cutoff) >= kTailTolerance) {
    require(cutoff < kMaxTruncation, ErrorCode::parameter_domain, "mu too large for Poisson truncation");
    cutoff *= 2;
  }
  return cutoff;
}

std::vector<double> click_distribution(int photons, const NoiseModel& model) {
  model.validate();
  require(photons >= 0, ErrorCode::parameter_domain, "photon number must be >= 0");
  const int n = model.channels;
  const long double eta = model.eta;
  const long double quiet = 1.0L - static_cast<long double>(model.dark_prob);

  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    // Inclusion-exclusion over which of the k chosen detectors stay silent:
    // (1 - m eta / n)^N is the chance every photon misses a fixed set of m
    // detectors, quiet^m that none of them dark-counts.
    CompensatedSum sum;
    for (int l = 0; l <= k; ++l) {
      const int silent = n - k + l;
      const long double miss = 1.0L - static_cast<long double>(silent) * eta / n;
      long double term = binomial(k, l) * std::pow(quiet, silent) * std::pow(miss, photons);
      if (l & 1) term = -term;
      sum.add(term);
    }
    out[static_cast<std::size_t>(k)] = clamp_probability(binomial(n, k) * sum.value(), "click distribution");
  }
  return out;
}

std::vector<double> click_probs(const NoiseModel& model) {
  const int cutoff = effective_truncation(model);
  const auto n = static_cast<std::size_t>(model.channels);
  std::vector<CompensatedSum> acc(n + 1);
  for (int photons = 0; photons <= cutoff; ++photons) {
    const double weight = poisson_pmf(model.mu, photons);
    if (weight == 0.0) continue;
    const auto dist = click_distribution(photons, model);
    for (std::size_t k = 0; k <= n; ++k) acc[k].add(static_cast<long double>(weight) * dist[k]);
  }
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out[k] = clamp_probability(acc[k].value(), "click probability");
  return out;
}

double click_prob(int clicks, const NoiseModel& model) {
  model.validate();
  require(clicks >= 0 && clicks <= model.channels, ErrorCode::parameter_domain,
          "click count must lie in [0, channels]");
  return click_probs(model)[static_cast<std::size_t>(clicks)];
}

double qber(const NoiseModel& model) {
  const double p_single = click_prob(1, model);
  if (!(p_single > 0.0)) fail(ErrorCode::undefined_conditional, "P(k=1) is zero; QBER undefined");
  const double single_given_one = click_distribution(1, model)[1];
  const double one_photon = poisson_pmf(model.mu, 1);
  const long double q = 1.0L - static_cast<long double>(single_given_one) * one_photon / p_single;
  return clamp_probability(q, "QBER");
}

void ExtractionParams::validate() const {
  require(raw_len >= 1, ErrorCode::parameter_domain, "raw length must be >= 1");
  require(qber >= 0.0 && qber <= 1.0, ErrorCode::parameter_domain, "QBER must lie in [0,1]");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::parameter_domain, "epsilon must lie in (0,1)");
}

std::uint64_t extractable_length(const ExtractionParams& params) {
  params.validate();
  const long double t = static_cast<long double>(params.raw_len);
  const long double penalty = 2.0L * -std::log2(static_cast<long double>(params.epsilon));
  const long double raw = t * (1.0L - static_cast<long double>(params.qber)) - penalty;
  // Q usually arrives as a decimal literal; absorb its representation error
  // before flooring so that e.g. 1e6 * (1 - 0.17) lands on 830000.
  const long double guarded = raw + 1e-12L * (t > 1.0L ? t : 1.0L);
  if (!(guarded >= 1.0L)) {
    fail(ErrorCode::insufficient_entropy,
         "extractable length is not positive (" + std::to_string(static_cast<double>(raw)) + ")");
  }
  return static_cast<std::uint64_t>(std::floor(guarded));
}

double compression_rate(const ExtractionParams& params) {
  return static_cast<double>(extractable_length(params)) / static_cast<double>(params.raw_len);
}

}  // namespace qrng

#include "qrng/sequence_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qrng/error.hpp"

namespace qrng {

void encode_append(PairedSequences& seqs, std::span<const ClickEvent> events) {
  seqs.q1.reserve(seqs.q1.size() + events.size());
  seqs.q2.reserve(seqs.q2.size() + events.size());
  for (const auto& e : events) {
    if (e.channel >= kOutcomes) {
      fail(ErrorCode::encoding, "click channel " + std::to_string(e.channel) + " has no ket");
    }
    const bool b1 = (e.channel >> 1) & 1;
    const bool b2 = e.channel & 1;
    seqs.q1.push_back(b1);
    seqs.q2.push_back(b2);
    if (seqs.audit) seqs.audit->push_back(b1 != b2);
  }
}

PairedSequences encode_clicks(std::span<const ClickEvent> events, bool with_audit) {
  PairedSequences seqs;
  if (with_audit) seqs.audit.emplace();
  encode_append(seqs, events);
  return seqs;
}

double binary_entropy(double p) {
  require(p >= 0.0 && p <= 1.0, ErrorCode::parameter_domain, "probability must lie in [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double entropy_distance(const ProbVector& probs) {
  probs.validate();
  const double a = std::clamp(probs.private_one(), 0.0, 1.0);
  const double b = std::clamp(probs.public_one(), 0.0, 1.0);
  return std::fabs(binary_entropy(a) - binary_entropy(b));
}

double max_entropy_distance(double lo, double hi) {
  require(0.0 <= lo && lo <= hi && hi <= 1.0, ErrorCode::parameter_domain,
          "need 0 <= lo <= hi <= 1");
  // H is concave and symmetric about 1/2: its max on [lo, hi] sits at the
  // point closest to 1/2, its min at one of the endpoints.
  const double peak = binary_entropy(std::clamp(0.5, lo, hi));
  const double floor = std::min(binary_entropy(lo), binary_entropy(hi));
  return peak - floor;
}

double mutual_information_estimate(const PairedSequences& seqs) {
  const std::size_t n = seqs.length();
  require(n >= 1 && seqs.q2.size() == n, ErrorCode::dimension, "need two equal, non-empty sequences");
  const double ones1 = static_cast<double>(seqs.q1.count_ones());
  const double ones2 = static_cast<double>(seqs.q2.count_ones());
  const double diff = static_cast<double>((seqs.q1 ^ seqs.q2).count_ones());
  // n11 from |q1| + |q2| = 2 n11 + |q1 ^ q2|
  const double n11 = (ones1 + ones2 - diff) / 2.0;
  const double total = static_cast<double>(n);
  const double joint[2][2] = {{total - ones1 - ones2 + n11, ones2 - n11}, {ones1 - n11, n11}};
  const double m1[2] = {total - ones1, ones1};
  const double m2[2] = {total - ones2, ones2};
  double mi = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (joint[a][b] <= 0.0) continue;
      mi += joint[a][b] / total * std::log2(joint[a][b] * total / (m1[a] * m2[b]));
    }
  }
  return std::max(mi, 0.0);
}

double mutual_information_threshold(std::size_t n) {
  require(n >= 1, ErrorCode::parameter_domain, "need n >= 1");
  return 10.0 / (2.0 * static_cast<double>(n) * std::numbers::ln2);
}

BitString audit_stream(const PairedSequences& seqs) { return seqs.q1 ^ seqs.q2; }

ProbVector empirical_probs(const PairedSequences& seqs) {
  const std::size_t n = seqs.length();
  require(n >= 1 && seqs.q2.size() == n, ErrorCode::dimension, "need two equal, non-empty sequences");
  const double ones1 = static_cast<double>(seqs.q1.count_ones());
  const double ones2 = static_cast<double>(seqs.q2.count_ones());
  const double diff = static_cast<double>((seqs.q1 ^ seqs.q2).count_ones());
  const double n11 = (ones1 + ones2 - diff) / 2.0;
  const double total = static_cast<double>(n);
  ProbVector p{{(total - ones1 - ones2 + n11) / total, (ones2 - n11) / total, (ones1 - n11) / total,
                n11 / total}};
  return p;
}

}  // namespace qrng

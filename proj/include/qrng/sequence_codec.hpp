#pragma once

// Mapping from post-selected clicks to the private/public bit pair, plus the
// entropy and correlation diagnostics used to decide whether the public half
// speaks for the private half.

#include <optional>
#include <span>

#include "qrng/bitstring.hpp"
#include "qrng/types.hpp"

namespace qrng {

struct PairedSequences {
  BitString q1;                    ///< private
  BitString q2;                    ///< public
  std::optional<BitString> audit;  ///< q1 XOR q2, when requested

  std::size_t length() const noexcept { return q1.size(); }
};

/// Channel c yields (q1, q2) = (c >> 1, c & 1). Throws ErrorCode::encoding
/// for channels outside 0..3.
PairedSequences encode_clicks(std::span<const ClickEvent> events, bool with_audit = false);

/// Appends to an existing pair.
void encode_append(PairedSequences& seqs, std::span<const ClickEvent> events);

/// Inverse of the per-event mapping.
inline int decode_channel(bool q1_bit, bool q2_bit) noexcept {
  return (q1_bit ? 2 : 0) | (q2_bit ? 1 : 0);
}

/// Shannon entropy of a Bernoulli(p) variable, in bits.
double binary_entropy(double p);

/// |H(p3 + p4) - H(p2 + p4)|.
double entropy_distance(const ProbVector& probs);

/// Worst-case |H(p) - H(q)| over p, q in [lo, hi].
double max_entropy_distance(double lo, double hi);

/// Plug-in mutual information of the empirical 2x2 joint of (q1[i], q2[i]).
double mutual_information_estimate(const PairedSequences& seqs);

/// Acceptance threshold for the plug-in estimate: ten times its expected bias
/// 1/(2 N ln 2) under independence.
double mutual_information_threshold(std::size_t n);

/// Elementwise XOR of q1 and q2.
BitString audit_stream(const PairedSequences& seqs);

/// Empirical channel frequencies of a pair, usable as a ProbVector.
ProbVector empirical_probs(const PairedSequences& seqs);

}  // namespace qrng

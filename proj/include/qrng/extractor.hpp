#pragma once

// Seeded Toeplitz hashing over GF(2), sized by the extractable-length bound.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qrng/bitstring.hpp"
#include "qrng/photon_stats.hpp"

namespace qrng {

/// Toeplitz matrix T (out_len x in_len) with T[i][j] = bits[j - i + out_len - 1].
/// Read bottom-up, bits[0..out_len) is the first column; bits[out_len-1..)
/// is the first row.
struct ToeplitzSeed {
  BitString bits;
  std::size_t in_len = 0;
  std::size_t out_len = 0;

  void validate() const;
  bool entry(std::size_t row, std::size_t col) const { return bits[col + out_len - 1 - row]; }
};

/// T x over GF(2). Throws ErrorCode::dimension when |x| != in_len.
BitString extract(const BitString& x, const ToeplitzSeed& seed);

/// Public seed material for the hash. Seeded sources are reproducible;
/// `from_entropy` draws its seed from std::random_device and records it.
class SeedSource {
 public:
  explicit SeedSource(std::uint64_t seed) : seed_(seed), gen_(seed) {}
  static SeedSource from_entropy();

  ToeplitzSeed next(std::size_t in_len, std::size_t out_len);
  std::uint64_t seed() const noexcept { return seed_; }
  static constexpr const char* kGenerator = "mt19937_64";

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

struct ExtractionBlock {
  std::uint64_t in_offset = 0;
  std::uint64_t in_len = 0;
  std::uint64_t out_len = 0;
};

struct ExtractionPlan {
  ExtractionParams params;
  std::uint64_t out_len = 0;  ///< l_q
  double rate = 0.0;          ///< l_q / T
  std::uint64_t block_bits = 0;
  std::vector<ExtractionBlock> blocks;
};

inline constexpr std::uint64_t kDefaultBlockBits = std::uint64_t{1} << 16;

/// Q from the noise model, l_q from the length bound, and a block layout whose
/// outputs sum exactly to l_q. The epsilon penalty is charged once for the
/// whole message.
ExtractionPlan plan_extraction(std::uint64_t raw_len, const NoiseModel& model, double epsilon,
                               std::uint64_t block_bits = kDefaultBlockBits);

/// Same, with Q supplied directly.
ExtractionPlan plan_extraction_for_qber(std::uint64_t raw_len, double qber, double epsilon,
                                        std::uint64_t block_bits = kDefaultBlockBits);

struct ExtractionResult {
  BitString output;
  std::uint64_t seed = 0;
};

/// Hashes every block with a fresh seed from `source`, concatenating in
/// block order. Seeds are drawn before hashing, so the output does not depend
/// on `threads`.
ExtractionResult extract_plan(const BitString& raw, const ExtractionPlan& plan, SeedSource& source,
                              unsigned threads = 1);

/// Manifest describing an extraction, as JSON.
std::string manifest_to_json(const ExtractionPlan& plan, std::uint64_t seed, int indent = 2);

}  // namespace qrng

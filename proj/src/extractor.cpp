#include "qrng/extractor.hpp"

#include <algorithm>
#include <thread>

#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/kernels.hpp"

namespace qrng {

void ToeplitzSeed::validate() const {
  require(out_len >= 1 && in_len >= 1, ErrorCode::dimension, "Toeplitz dimensions must be >= 1");
  require(out_len <= in_len, ErrorCode::dimension, "Toeplitz output longer than input");
  require(bits.size() == in_len + out_len - 1, ErrorCode::dimension,
          "Toeplitz seed must have in_len + out_len - 1 bits");
}

BitString extract(const BitString& x, const ToeplitzSeed& seed) {
  seed.validate();
  require(x.size() == seed.in_len, ErrorCode::dimension,
          "input has " + std::to_string(x.size()) + " bits, seed expects " + std::to_string(seed.in_len));
  const std::size_t nwords = BitString::word_count(seed.in_len);
  // window_parity reads one word past each window
  std::vector<std::uint64_t> padded((seed.out_len - 1) / 64 + nwords + 2, 0);
  std::copy(seed.bits.words().begin(), seed.bits.words().end(), padded.begin());

  const auto& k = kernels::active();
  BitString out(seed.out_len);
  for (std::size_t i = 0; i < seed.out_len; ++i) {
    if (k.window_parity(padded.data(), seed.out_len - 1 - i, x.words().data(), nwords)) out.set(i, true);
  }
  return out;
}

SeedSource SeedSource::from_entropy() {
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  return SeedSource(seed);
}

ToeplitzSeed SeedSource::next(std::size_t in_len, std::size_t out_len) {
  require(in_len >= 1 && out_len >= 1, ErrorCode::dimension, "Toeplitz dimensions must be >= 1");
  ToeplitzSeed s;
  s.in_len = in_len;
  s.out_len = out_len;
  s.bits = BitString(in_len + out_len - 1);
  for (auto& w : s.bits.mutable_words()) w = gen_();
  s.bits.resize(s.bits.size());  // clears the tail
  return s;
}

ExtractionPlan plan_extraction_for_qber(std::uint64_t raw_len, double qber_value, double epsilon,
                                        std::uint64_t block_bits) {
  require(block_bits >= 1, ErrorCode::parameter_domain, "block size must be >= 1");
  ExtractionPlan plan;
  plan.params = ExtractionParams{raw_len, qber_value, epsilon};
  plan.out_len = extractable_length(plan.params);
  plan.rate = static_cast<double>(plan.out_len) / static_cast<double>(raw_len);
  plan.block_bits = block_bits;
  // Block i gets floor(end_i * l / T) - floor(start_i * l / T) output bits,
  // so the outputs telescope to exactly l and each stays below its input.
  using u128 = unsigned __int128;
  std::uint64_t produced = 0;
  for (std::uint64_t start = 0; start < raw_len; start += block_bits) {
    const std::uint64_t end = std::min(raw_len, start + block_bits);
    const auto upto = static_cast<std::uint64_t>(static_cast<u128>(end) * plan.out_len / raw_len);
    ExtractionBlock b{start, end - start, upto - produced};
    produced = upto;
    if (b.out_len > 0) plan.blocks.push_back(b);
  }
  return plan;
}

ExtractionPlan plan_extraction(std::uint64_t raw_len, const NoiseModel& model, double epsilon,
                               std::uint64_t block_bits) {
  return plan_extraction_for_qber(raw_len, qber(model), epsilon, block_bits);
}

ExtractionResult extract_plan(const BitString& raw, const ExtractionPlan& plan, SeedSource& source,
                              unsigned threads) {
  require(raw.size() == plan.params.raw_len, ErrorCode::dimension,
          "raw sequence length does not match the extraction plan");
  std::vector<ToeplitzSeed> seeds;
  seeds.reserve(plan.blocks.size());
  for (const auto& b : plan.blocks) seeds.push_back(source.next(b.in_len, b.out_len));

  std::vector<BitString> parts(plan.blocks.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < plan.blocks.size(); i += stride) {
      const auto& b = plan.blocks[i];
      parts[i] = extract(raw.slice(b.in_offset, b.in_len), seeds[i]);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(plan.blocks.size())));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& t : pool) t.join();
  }
  ExtractionResult result;
  result.seed = source.seed();
  result.output.reserve(plan.out_len);
  for (const auto& p : parts) result.output.append(p);
  return result;
}

std::string manifest_to_json(const ExtractionPlan& plan, std::uint64_t seed, int indent) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : plan.blocks) {
    blocks.push_back({{"in_offset", b.in_offset}, {"in_len", b.in_len}, {"out_len", b.out_len}});
  }
  nlohmann::json j{{"extractor", "toeplitz"},
                   {"seed", {{"generator", SeedSource::kGenerator}, {"value", seed}}},
                   {"raw_len", plan.params.raw_len},
                   {"qber", plan.params.qber},
                   {"epsilon", plan.params.epsilon},
                   {"out_len", plan.out_len},
                   {"rate", plan.rate},
                   {"block_bits", plan.block_bits},
                   {"blocks", blocks}};
  return j.dump(indent);
}

}  // namespace qrng

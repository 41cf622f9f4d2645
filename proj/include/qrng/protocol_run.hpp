#pragma once

// End-to-end device run: generate under the balance gate, delegate the public
// sequence for verification, and hash the private sequence once it passes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qrng/error.hpp"
#include "qrng/extractor.hpp"
#include "qrng/randomness_tests.hpp"
#include "qrng/run_config.hpp"
#include "qrng/sequence_codec.hpp"

namespace qrng {

enum ExitCode : int {
  kExitPass = 0,
  kExitOther = 1,
  kExitVerdictFail = 2,
  kExitBalance = 3,
  kExitEntropy = 4,
  kExitTransport = 5,
};

/// Exit code for an error escaping a subcommand.
int exit_code_for(ErrorCode code) noexcept;

struct IntervalRecord {
  std::uint64_t index = 0;
  bool accepted = false;
  std::array<double, kOutcomes> frequencies{};
  std::uint64_t events = 0;
};

struct RunSummary {
  std::uint64_t intervals = 0;
  std::uint64_t accepted_intervals = 0;
  std::uint64_t rejected_intervals = 0;
  std::uint64_t bits = 0;
  int submissions = 0;
  double entropy_distance = 0.0;          ///< of the submitted pair's frequencies
  double entropy_distance_bound = 0.0;    ///< worst case over the gate window
  double max_interval_entropy_distance = 0.0;
  double mutual_information = 0.0;
  double mutual_information_threshold = 0.0;
  double qber = 0.0;
  double rate = 0.0;
  std::uint64_t extracted_bits = 0;
  std::string session_id;
  std::string verdict = "none";  ///< "pass", "fail" or "none"
  bool audit_committed = false;
  int exit_code = kExitOther;
  std::string error_code;  ///< error name, empty on success
  std::string error;
};

struct RunOutcome {
  RunSummary summary;
  PairedSequences sequences;
  std::optional<TestReport> report;
  std::optional<ExtractionPlan> plan;
  std::optional<ExtractionResult> extraction;
  std::vector<IntervalRecord> intervals;
};

/// Runs the whole protocol. Errors are folded into summary.exit_code; when
/// `write_outputs` is set, artifacts land in cfg.output_dir.
RunOutcome execute_run(const RunConfig& cfg, bool write_outputs = true);

std::string summary_to_json(const RunSummary& s, int indent = 2);

}  // namespace qrng

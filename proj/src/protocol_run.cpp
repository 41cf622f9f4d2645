#include "qrng/protocol_run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>

#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/file_formats.hpp"
#include "qrng/net/device_client.hpp"
#include "qrng/net/verifier_service.hpp"
#include "qrng/optics_sim.hpp"

namespace qrng {
namespace {

namespace fs = std::filesystem;

struct Generated {
  PairedSequences seqs;
  bool complete = false;
};

// Fills one pair of `target` bits from gated intervals.
Generated generate(Simulator& sim, const RunConfig& cfg, RunOutcome& out) {
  Generated g;
  g.seqs.q1.reserve(cfg.target_bits);
  g.seqs.q2.reserve(cfg.target_bits);
  if (cfg.audit.enabled) g.seqs.audit = BitString{};
  const auto pulses =
      static_cast<std::uint64_t>(std::llround(cfg.control_interval * cfg.scheme.pulse_rate));
  while (g.seqs.length() < cfg.target_bits) {
    if (out.summary.intervals >= cfg.max_intervals) return g;
    PostSelector sel;
    sim.run(pulses, [&](std::span<const DetectionRecord> r) { sel.add(r); });
    const auto& events = sel.events();
    const GateDecision gate = balance_gate(events, cfg.balance_lo, cfg.balance_hi);
    IntervalRecord rec{out.summary.intervals, gate.accepted, gate.frequencies, gate.events};
    out.intervals.push_back(rec);
    ++out.summary.intervals;
    if (!gate.accepted) {
      ++out.summary.rejected_intervals;
      continue;
    }
    ++out.summary.accepted_intervals;
    ProbVector f;
    f.p = gate.frequencies;
    out.summary.max_interval_entropy_distance =
        std::max(out.summary.max_interval_entropy_distance, entropy_distance(f));
    const std::size_t need = cfg.target_bits - g.seqs.length();
    const std::size_t take = std::min(need, events.size());
    encode_append(g.seqs, std::span<const ClickEvent>(events.data(), take));
  }
  g.complete = true;
  return g;
}

void write_outputs_to(const fs::path& dir, const RunOutcome& out, const RunConfig& cfg) {
  fs::create_directories(dir);
  io::write_bit_file(dir / "q1.bits", out.sequences.q1);
  io::write_bit_file(dir / "q2.bits", out.sequences.q2);
  if (out.sequences.audit) io::write_bit_file(dir / "audit.bits", *out.sequences.audit);
  if (out.report) io::write_text(dir / "report.json", report_to_json(*out.report, 2));
  if (out.extraction) {
    io::write_bit_file(dir / "extracted.bits", out.extraction->output);
    io::write_text(dir / "manifest.json", manifest_to_json(*out.plan, out.extraction->seed));
  }
  std::ofstream csv(dir / "intervals.csv");
  csv << "interval,accepted,events,f1,f2,f3,f4\n";
  for (const auto& r : out.intervals) {
    csv << r.index << ',' << (r.accepted ? 1 : 0) << ',' << r.events;
    for (double f : r.frequencies) csv << ',' << f;
    csv << '\n';
  }
  io::write_text(dir / "config.json", run_config_to_json(cfg));
  io::write_text(dir / "summary.json", summary_to_json(out.summary));
}

fs::path loopback_storage(const RunConfig& cfg, bool write_outputs) {
  if (write_outputs) return cfg.output_dir / "verifier-data";
  std::random_device rd;
  return fs::temp_directory_path() / ("qrng-verifier-" + std::to_string(rd()) + std::to_string(rd()));
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::transport:
    case ErrorCode::timeout:
      return kExitTransport;
    case ErrorCode::insufficient_entropy:
      return kExitEntropy;
    default:
      return kExitOther;
  }
}

RunOutcome execute_run(const RunConfig& cfg, bool write_outputs) {
  RunOutcome out;
  auto& s = out.summary;
  std::unique_ptr<net::VerifierService> loopback;
  bool remove_storage = false;
  fs::path storage;
  try {
    cfg.validate();
    // Each marginal is a sum of two gated channel frequencies.
    s.entropy_distance_bound = max_entropy_distance(std::min(1.0, 2 * cfg.balance_lo), std::min(1.0, 2 * cfg.balance_hi));

    net::Endpoint verifier;
    if (cfg.verifier.endpoint == "loopback") {
      net::ServiceConfig sc = cfg.service;
      sc.listen = net::Endpoint{"127.0.0.1", 0};
      storage = loopback_storage(cfg, write_outputs);
      remove_storage = !write_outputs;
      sc.storage = storage;
      loopback = std::make_unique<net::VerifierService>(sc);
      loopback->start();
      verifier = loopback->endpoint();
    } else {
      verifier = net::Endpoint::parse(cfg.verifier.endpoint);
    }

    Simulator sim(cfg.scheme, cfg.threads);
    bool passed = false;
    for (int attempt = 0; attempt < cfg.verifier.max_submissions && !passed; ++attempt) {
      Generated g = generate(sim, cfg, out);
      out.sequences = std::move(g.seqs);
      s.bits = out.sequences.length();
      if (!g.complete) {
        s.exit_code = kExitBalance;
        s.error_code = "balance_never_achieved";
        s.error = "balance never achieved: " + std::to_string(s.bits) + " of " +
                  std::to_string(cfg.target_bits) + " bits after " + std::to_string(s.intervals) + " intervals";
        break;
      }
      s.entropy_distance = entropy_distance(empirical_probs(out.sequences));
      s.mutual_information = mutual_information_estimate(out.sequences);
      s.mutual_information_threshold = mutual_information_threshold(out.sequences.length());

      net::SubmitOptions opts;
      opts.criteria_id = cfg.verifier.criteria_id;
      opts.device_token = cfg.verifier.device_token;
      opts.timeout = cfg.verifier.timeout;
      if (cfg.audit.endpoint) opts.audit_endpoint = net::Endpoint::parse(*cfg.audit.endpoint);
      const BitString* audit = out.sequences.audit ? &*out.sequences.audit : nullptr;
      ++s.submissions;
      net::SubmitResult res = net::device_submit(verifier, out.sequences.q2, opts, audit);
      s.session_id = res.session_id;
      s.verdict = res.pass ? "pass" : "fail";
      s.audit_committed = res.audit_committed;
      out.report = std::move(res.report);
      passed = res.pass;
    }

    if (s.exit_code != kExitBalance) {
      if (!passed) {
        s.exit_code = kExitVerdictFail;
        s.error_code = "verdict_fail";
        s.error = "verdict fail after " + std::to_string(s.submissions) + " submission(s)";
      } else {
        out.plan = plan_extraction(out.sequences.length(), cfg.scheme.noise, cfg.extraction.epsilon,
                                   cfg.extraction.block_bits);
        s.qber = out.plan->params.qber;
        s.rate = out.plan->rate;
        SeedSource src = cfg.extraction.seed ? SeedSource(*cfg.extraction.seed) : SeedSource::from_entropy();
        out.extraction = extract_plan(out.sequences.q1, *out.plan, src, cfg.threads);
        s.extracted_bits = out.extraction->output.size();
        s.exit_code = kExitPass;
      }
    }
  } catch (const Error& e) {
    s.exit_code = exit_code_for(e.code());
    s.error_code = std::string(to_string(e.code()));
    s.error = e.what();
  } catch (const std::exception& e) {
    s.exit_code = kExitOther;
    s.error_code = "internal";
    s.error = e.what();
  }
  if (loopback) loopback->stop();
  loopback.reset();
  if (remove_storage) {
    std::error_code ec;
    fs::remove_all(storage, ec);
  }
  if (write_outputs) {
    try {
      write_outputs_to(cfg.output_dir, out, cfg);
    } catch (const std::exception& e) {
      if (s.exit_code == kExitPass) {
        s.exit_code = kExitOther;
        s.error_code = "format";
      }
      s.error = std::string("writing outputs: ") + e.what();
    }
  }
  return out;
}

std::string summary_to_json(const RunSummary& s, int indent) {
  nlohmann::json j{{"intervals", s.intervals},
                   {"accepted_intervals", s.accepted_intervals},
                   {"rejected_intervals", s.rejected_intervals},
                   {"bits", s.bits},
                   {"submissions", s.submissions},
                   {"entropy_distance", s.entropy_distance},
                   {"entropy_distance_bound", s.entropy_distance_bound},
                   {"max_interval_entropy_distance", s.max_interval_entropy_distance},
                   {"mutual_information", s.mutual_information},
                   {"mutual_information_threshold", s.mutual_information_threshold},
                   {"qber", s.qber},
                   {"rate", s.rate},
                   {"extracted_bits", s.extracted_bits},
                   {"session_id", s.session_id},
                   {"verdict", s.verdict},
                   {"audit_committed", s.audit_committed},
                   {"exit_code", s.exit_code},
                   {"error_code", s.error_code},
                   {"error", s.error}};
  return j.dump(indent);
}

}  // namespace qrng

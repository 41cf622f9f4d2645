// qrngctl: command-line front end for the delegated-verification QRNG.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/extractor.hpp"
#include "qrng/file_formats.hpp"
#include "qrng/net/device_client.hpp"
#include "qrng/net/verifier_service.hpp"
#include "qrng/optics_sim.hpp"
#include "qrng/protocol_run.hpp"
#include "qrng/randomness_tests.hpp"
#include "qrng/run_config.hpp"
#include "qrng/sequence_codec.hpp"

namespace {

using namespace qrng;
using nlohmann::json;
namespace fs = std::filesystem;

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

json structured_error(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

// Flags that may override the configuration file.
struct Overrides {
  std::optional<std::string> scheme;
  std::optional<double> mu, eta, dark_prob, pulse_rate, control_interval, epsilon;
  std::optional<std::string> drift;
  std::optional<std::uint64_t> seed, extraction_seed, target_bits, max_intervals;
  std::optional<unsigned> threads;
  std::optional<std::string> endpoint, criteria, token, output_dir;

  void add_scheme_flags(CLI::App* app) {
    app->add_option("--scheme", scheme, "spatial or temporal");
    app->add_option("--mu", mu, "mean photon number per pulse");
    app->add_option("--eta", eta, "detection efficiency");
    app->add_option("--dark-prob", dark_prob, "dark-count probability per channel per pulse");
    app->add_option("--pulse-rate", pulse_rate, "pulses per second");
    app->add_option("--drift", drift, "none, ou_walk or sinusoid");
    app->add_option("--seed", seed, "simulator seed");
    app->add_option("--threads", threads, "worker threads");
  }

  void apply(RunConfig& cfg) const {
    if (scheme) cfg.scheme.scheme = parse_scheme(*scheme);
    if (mu) cfg.scheme.noise.mu = *mu;
    if (eta) cfg.scheme.noise.eta = *eta;
    if (dark_prob) cfg.scheme.noise.dark_prob = *dark_prob;
    if (pulse_rate) cfg.scheme.pulse_rate = *pulse_rate;
    if (drift) cfg.scheme.drift.mode = parse_drift_mode(*drift);
    if (seed) cfg.scheme.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (control_interval) cfg.control_interval = *control_interval;
    if (epsilon) cfg.extraction.epsilon = *epsilon;
    if (extraction_seed) cfg.extraction.seed = *extraction_seed;
    if (target_bits) cfg.target_bits = *target_bits;
    if (max_intervals) cfg.max_intervals = *max_intervals;
    if (endpoint) cfg.verifier.endpoint = *endpoint;
    if (criteria) cfg.verifier.criteria_id = *criteria;
    if (token) cfg.verifier.device_token = *token;
    if (output_dir) cfg.output_dir = *output_dir;
  }
};

struct Context {
  std::string config_path;
  Overrides flags;

  RunConfig config() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    flags.apply(cfg);
    cfg.validate();
    return cfg;
  }
};

const BatteryConfig& criteria_for(const RunConfig& cfg, const std::string& id) {
  const auto it = cfg.service.criteria.find(id);
  if (it == cfg.service.criteria.end()) fail(ErrorCode::not_found, "unknown criteria id '" + id + "'");
  return it->second;
}

int cmd_simulate(const Context& ctx, std::uint64_t pulses, const std::string& out) {
  const RunConfig cfg = ctx.config();
  require(pulses > 0, ErrorCode::config, "--pulses must be > 0");
  io::EventWriter writer(out, io::EventFileHeader{cfg.scheme.scheme, cfg.scheme.pulse_rate,
                                                  cfg.scheme.bin_spacing, 0, 0});
  Simulator sim(cfg.scheme, cfg.threads);
  PostSelection hist;
  sim.run(pulses, [&](std::span<const DetectionRecord> recs) {
    writer.add(recs);
    for (const auto& r : recs) ++hist.histogram[static_cast<std::size_t>(std::popcount(r.mask))];
  });
  writer.close();
  json h = json::array();
  for (auto c : hist.histogram) h.push_back(c);
  print_json({{"pulses", pulses}, {"events_file", out}, {"click_histogram", h}});
  return kExitPass;
}

int cmd_encode(const std::string& events, const fs::path& out_dir, bool audit) {
  const io::EventFile ef = io::read_event_file(events);
  PostSelection sel = post_select(ef.records);
  // Event files omit empty pulses.
  sel.histogram[0] = ef.header.pulses - ef.records.size();
  const PairedSequences seqs = encode_clicks(sel.events, audit);
  fs::create_directories(out_dir);
  io::write_bit_file(out_dir / "q1.bits", seqs.q1);
  io::write_bit_file(out_dir / "q2.bits", seqs.q2);
  if (seqs.audit) io::write_bit_file(out_dir / "audit.bits", *seqs.audit);
  json h = json::array();
  for (auto c : sel.histogram) h.push_back(c);
  print_json({{"pulses", ef.header.pulses}, {"single_clicks", sel.events.size()}, {"click_histogram", h}});
  return kExitPass;
}

int cmd_diagnose(const std::string& q1_path, const std::string& q2_path, const std::string& events,
                 const std::string& csv, double interval, std::size_t group) {
  json out = json::object();
  if (!q1_path.empty() || !q2_path.empty()) {
    require(!q1_path.empty() && !q2_path.empty(), ErrorCode::config, "--q1 and --q2 go together");
    PairedSequences seqs{io::read_bit_file(q1_path), io::read_bit_file(q2_path), std::nullopt};
    require(seqs.q1.size() == seqs.q2.size(), ErrorCode::dimension, "q1 and q2 differ in length");
    const ProbVector p = empirical_probs(seqs);
    out["bits"] = seqs.length();
    out["frequencies"] = p.p;
    out["entropy_private"] = binary_entropy(p.private_one());
    out["entropy_public"] = binary_entropy(p.public_one());
    out["entropy_distance"] = entropy_distance(p);
    const double mi = mutual_information_estimate(seqs);
    const double thr = mutual_information_threshold(seqs.length());
    out["mutual_information"] = mi;
    out["mutual_information_threshold"] = thr;
    out["mutual_information_pass"] = mi <= thr;
  }
  if (!events.empty()) {
    const io::EventFile ef = io::read_event_file(events);
    const PostSelection sel = post_select(ef.records);
    const double duration = static_cast<double>(ef.header.pulses) / ef.header.pulse_rate;
    const auto trace = stability_trace(sel.events, ef.header.pulse_rate, interval, group, duration);
    double dev = 0.0;
    for (double v : trace) dev = std::max(dev, std::abs(v - 1.0));
    out["stability_points"] = trace.size();
    out["stability_max_deviation"] = dev;
    if (!csv.empty()) {
      std::ofstream f(csv);
      if (!f) fail(ErrorCode::format, "cannot write " + csv);
      f << "time_s,normalized_rate\n";
      for (std::size_t i = 0; i < trace.size(); ++i) {
        f << (static_cast<double>(i) + 0.5) * interval * static_cast<double>(group) << ',' << trace[i] << '\n';
      }
    }
  }
  require(!out.empty(), ErrorCode::config, "nothing to diagnose: give --q1/--q2 and/or --events");
  print_json(out);
  return kExitPass;
}

int cmd_test(const Context& ctx, const std::string& bits_path, const std::string& criteria,
             const std::string& report_path, const std::string& cdf_csv) {
  const RunConfig cfg = ctx.config();
  const BitString bits = io::read_bit_file(bits_path);
  const TestReport report = run_battery(bits, criteria_for(cfg, criteria));
  if (!report_path.empty()) io::write_text(report_path, report_to_json(report, 2));
  if (!cdf_csv.empty()) {
    auto p = report.pooled_p_values();
    std::sort(p.begin(), p.end());
    std::ofstream f(cdf_csv);
    if (!f) fail(ErrorCode::format, "cannot write " + cdf_csv);
    f << "p_value,empirical_cdf\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      f << p[i] << ',' << static_cast<double>(i + 1) / static_cast<double>(p.size()) << '\n';
    }
  }
  std::cout << report_to_json(report, 2) << '\n';
  return report.verdict() ? kExitPass : kExitVerdictFail;
}

int cmd_extract(const Context& ctx, const std::string& bits_path, std::optional<double> qber,
                const std::string& out, const std::string& manifest) {
  const RunConfig cfg = ctx.config();
  const BitString raw = io::read_bit_file(bits_path);
  const ExtractionPlan plan =
      qber ? plan_extraction_for_qber(raw.size(), *qber, cfg.extraction.epsilon, cfg.extraction.block_bits)
           : plan_extraction(raw.size(), cfg.scheme.noise, cfg.extraction.epsilon, cfg.extraction.block_bits);
  SeedSource src = cfg.extraction.seed ? SeedSource(*cfg.extraction.seed) : SeedSource::from_entropy();
  const ExtractionResult res = extract_plan(raw, plan, src, cfg.threads);
  io::write_bit_file(out, res.output);
  const std::string m = manifest_to_json(plan, res.seed);
  if (!manifest.empty()) io::write_text(manifest, m);
  std::cout << m << '\n';
  return kExitPass;
}

int cmd_serve(const Context& ctx, const std::optional<std::string>& listen, const std::optional<std::string>& storage) {
  RunConfig cfg = ctx.config();
  net::ServiceConfig sc = cfg.service;
  if (listen) sc.listen = net::Endpoint::parse(*listen);
  if (storage) sc.storage = *storage;
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  net::VerifierService service(sc);
  service.start();
  std::cerr << "verifier listening on " << service.endpoint().to_string() << " storage " << sc.storage.string()
            << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
  return kExitPass;
}

int cmd_submit(const Context& ctx, const std::string& bits_path, const std::string& audit_path) {
  const RunConfig cfg = ctx.config();
  require(cfg.verifier.endpoint != "loopback", ErrorCode::config, "submit needs --endpoint host:port");
  const BitString q2 = io::read_bit_file(bits_path);
  std::optional<BitString> audit;
  if (!audit_path.empty()) audit = io::read_bit_file(audit_path);
  net::SubmitOptions opts;
  opts.criteria_id = cfg.verifier.criteria_id;
  opts.device_token = cfg.verifier.device_token;
  opts.timeout = cfg.verifier.timeout;
  if (cfg.audit.endpoint) opts.audit_endpoint = net::Endpoint::parse(*cfg.audit.endpoint);
  const auto res = net::device_submit(net::Endpoint::parse(cfg.verifier.endpoint), q2, opts,
                                      audit ? &*audit : nullptr);
  print_json({{"session_id", res.session_id},
              {"verdict", res.pass ? "pass" : "fail"},
              {"audit_committed", res.audit_committed},
              {"report", json::parse(report_to_json(res.report))}});
  return res.pass ? kExitPass : kExitVerdictFail;
}

int cmd_audit(const std::string& endpoint, const std::string& session, const std::string& token,
              const std::string& out, const std::string& q2_path) {
  const BitString audit = net::audit_retrieve(net::Endpoint::parse(endpoint), session, token);
  io::write_bit_file(out, audit);
  json j{{"session_id", session}, {"bits", audit.size()}, {"out", out}};
  if (!q2_path.empty()) {
    // Auditor-side reconstruction: Q1 = audit XOR Q2.
    const BitString q2 = io::read_bit_file(q2_path);
    require(q2.size() == audit.size(), ErrorCode::dimension, "q2 and audit differ in length");
    const fs::path q1_out = fs::path(out).replace_extension(".q1.bits");
    io::write_bit_file(q1_out, audit ^ q2);
    j["reconstructed_q1"] = q1_out.string();
  }
  print_json(j);
  return kExitPass;
}

int cmd_verdict(const std::string& endpoint, const std::string& session, const std::string& token) {
  std::cout << net::fetch_verdict(net::Endpoint::parse(endpoint), session, token) << '\n';
  return kExitPass;
}

int cmd_export(const std::string& bits_path, const std::string& out, const std::string& sidecar) {
  const auto data = io::read_text(bits_path);
  const io::ExportedBits ex =
      io::export_bits(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  if (!ex.warning.empty()) std::cerr << "warning: " << ex.warning << '\n';
  if (out == "-") {
    std::fwrite(ex.bytes.data(), 1, ex.bytes.size(), stdout);
    std::fflush(stdout);
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::format, "cannot write " + out);
    f.write(reinterpret_cast<const char*>(ex.bytes.data()), static_cast<std::streamsize>(ex.bytes.size()));
  }
  const std::string side = sidecar.empty() ? (out == "-" ? std::string() : out + ".json") : sidecar;
  if (!side.empty()) io::write_text(side, io::export_sidecar_json(ex));
  return kExitPass;
}

int cmd_run(const Context& ctx) {
  const RunConfig cfg = ctx.config();
  const RunOutcome outcome = execute_run(cfg, true);
  std::cout << summary_to_json(outcome.summary) << '\n';
  if (outcome.summary.exit_code != kExitPass) {
    std::cerr << structured_error(outcome.summary.error_code, outcome.summary.error).dump() << '\n';
  }
  return outcome.summary.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delegated-verification QRNG toolkit"};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("-c,--config", ctx.config_path, "run configuration (JSON)")->check(CLI::ExistingFile);

  int rc = kExitOther;

  auto* sim = app.add_subcommand("simulate", "simulate detection records into an event file");
  std::uint64_t pulses = 1'000'000;
  std::string sim_out = "events.qev";
  sim->add_option("-n,--pulses", pulses, "number of pulses");
  sim->add_option("-o,--out", sim_out, "event file to write");
  ctx.flags.add_scheme_flags(sim);
  sim->callback([&] { rc = cmd_simulate(ctx, pulses, sim_out); });

  auto* enc = app.add_subcommand("encode", "post-select an event file into Q1/Q2 bit files");
  std::string enc_in, enc_out = ".";
  bool enc_audit = false;
  enc->add_option("events", enc_in, "event file")->required()->check(CLI::ExistingFile);
  enc->add_option("-o,--out-dir", enc_out, "output directory");
  enc->add_flag("--audit", enc_audit, "also write the XOR audit stream");
  enc->callback([&] { rc = cmd_encode(enc_in, enc_out, enc_audit); });

  auto* diag = app.add_subcommand("diagnose", "entropy distance, mutual information and stability trace");
  std::string dq1, dq2, dev, dcsv;
  double dinterval = 3e-3;
  std::size_t dgroup = 100;
  diag->add_option("--q1", dq1, "private bit file")->check(CLI::ExistingFile);
  diag->add_option("--q2", dq2, "public bit file")->check(CLI::ExistingFile);
  diag->add_option("--events", dev, "event file for the stability trace")->check(CLI::ExistingFile);
  diag->add_option("--stability-csv", dcsv, "write the stability trace as CSV");
  diag->add_option("--interval", dinterval, "counting window in seconds");
  diag->add_option("--group", dgroup, "windows per averaged point");
  diag->callback([&] { rc = cmd_diagnose(dq1, dq2, dev, dcsv, dinterval, dgroup); });

  auto* test = app.add_subcommand("test", "run the randomness battery on a bit file");
  std::string tbits, tcrit = "default", treport, tcdf;
  test->add_option("bits", tbits, "bit file")->required()->check(CLI::ExistingFile);
  test->add_option("--criteria", tcrit, "criteria id from the config registry");
  test->add_option("--report", treport, "write the report JSON here");
  test->add_option("--cdf-csv", tcdf, "write the pooled p-value CDF as CSV");
  test->callback([&] { rc = cmd_test(ctx, tbits, tcrit, treport, tcdf); });

  auto* ext = app.add_subcommand("extract", "Toeplitz-hash a raw bit file down to its extractable length");
  std::string xbits, xout = "extracted.bits", xmanifest;
  std::optional<double> xqber;
  ext->add_option("bits", xbits, "raw (private) bit file")->required()->check(CLI::ExistingFile);
  ext->add_option("-o,--out", xout, "output bit file");
  ext->add_option("--manifest", xmanifest, "write the manifest JSON here");
  ext->add_option("--qber", xqber, "use this Q instead of the noise model");
  ext->add_option("--epsilon", ctx.flags.epsilon, "security parameter");
  ext->add_option("--extraction-seed", ctx.flags.extraction_seed, "Toeplitz seed generator seed");
  ext->add_option("--mu", ctx.flags.mu, "mean photon number per pulse");
  ext->add_option("--eta", ctx.flags.eta, "detection efficiency");
  ext->add_option("--dark-prob", ctx.flags.dark_prob, "dark-count probability");
  ext->add_option("--threads", ctx.flags.threads, "worker threads");
  ext->callback([&] { rc = cmd_extract(ctx, xbits, xqber, xout, xmanifest); });

  auto* serve = app.add_subcommand("serve", "run the verifier service until SIGINT/SIGTERM");
  std::optional<std::string> slisten, sstorage;
  serve->add_option("--listen", slisten, "host:port");
  serve->add_option("--storage", sstorage, "storage directory");
  serve->callback([&] { rc = cmd_serve(ctx, slisten, sstorage); });

  auto* submit = app.add_subcommand("submit", "submit a public bit file to a verifier");
  std::string sbits, saudit;
  submit->add_option("bits", sbits, "public (Q2) bit file")->required()->check(CLI::ExistingFile);
  submit->add_option("--audit", saudit, "audit stream to commit on pass")->check(CLI::ExistingFile);
  submit->add_option("--endpoint", ctx.flags.endpoint, "verifier host:port");
  submit->add_option("--criteria", ctx.flags.criteria, "criteria id");
  submit->add_option("--token", ctx.flags.token, "device token");
  submit->callback([&] { rc = cmd_submit(ctx, sbits, saudit); });

  auto* audit = app.add_subcommand("audit", "retrieve a committed audit stream");
  std::string aend, asession, atoken = "auditor-token", aout = "audit.bits", aq2;
  audit->add_option("--endpoint", aend, "auditor host:port")->required();
  audit->add_option("--session", asession, "session id")->required();
  audit->add_option("--token", atoken, "auditor token");
  audit->add_option("-o,--out", aout, "output bit file");
  audit->add_option("--q2", aq2, "public bit file; reconstructs Q1 next to the output")->check(CLI::ExistingFile);
  audit->callback([&] { rc = cmd_audit(aend, asession, atoken, aout, aq2); });

  auto* verdict = app.add_subcommand("verdict", "fetch the stored verdict of a session");
  std::string vend, vsession, vtoken = "reader-token";
  verdict->add_option("--endpoint", vend, "verifier host:port")->required();
  verdict->add_option("--session", vsession, "session id")->required();
  verdict->add_option("--token", vtoken, "reader token");
  verdict->callback([&] { rc = cmd_verdict(vend, vsession, vtoken); });

  auto* exp = app.add_subcommand("export", "dump the raw MSB-first payload of a bit file");
  std::string ebits, eout = "-", esidecar;
  exp->add_option("bits", ebits, "bit file")->required()->check(CLI::ExistingFile);
  exp->add_option("-o,--out", eout, "output file, '-' for stdout");
  exp->add_option("--sidecar", esidecar, "sidecar JSON path (default <out>.json)");
  exp->callback([&] { rc = cmd_export(ebits, eout, esidecar); });

  auto* run = app.add_subcommand("run", "full protocol: generate, delegate, extract");
  ctx.flags.add_scheme_flags(run);
  run->add_option("--control-interval", ctx.flags.control_interval, "seconds per balance-control interval");
  run->add_option("--target-bits", ctx.flags.target_bits, "bits per submitted sequence");
  run->add_option("--max-intervals", ctx.flags.max_intervals, "give up after this many intervals");
  run->add_option("--endpoint", ctx.flags.endpoint, "verifier host:port or 'loopback'");
  run->add_option("--criteria", ctx.flags.criteria, "criteria id");
  run->add_option("--epsilon", ctx.flags.epsilon, "security parameter");
  run->add_option("--extraction-seed", ctx.flags.extraction_seed, "Toeplitz seed generator seed");
  run->add_option("-o,--output-dir", ctx.flags.output_dir, "artifact directory");
  run->callback([&] { rc = cmd_run(ctx); });

  auto* cfgcmd = app.add_subcommand("config", "print the effective configuration");
  cfgcmd->callback([&] {
    std::cout << run_config_to_json(ctx.config()) << '\n';
    rc = kExitPass;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << structured_error(std::string(to_string(e.code())), e.what()).dump() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << structured_error("internal", e.what()).dump() << '\n';
    return kExitOther;
  }
  return rc;
}

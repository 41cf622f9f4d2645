#include "qrng/run_config.hpp"

#include <set>

#include "json.hpp"
#include "qrng/error.hpp"
#include "qrng/file_formats.hpp"

namespace qrng {
namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorCode::config, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) fail(ErrorCode::config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

BatteryConfig parse_battery(const json& j, const std::string& id) {
  only_keys(j, "criteria." + id,
            {"alpha", "min_bits", "tests", "block_frequency_m", "serial_m", "approximate_entropy_m",
             "min_test_bits", "parallel"});
  BatteryConfig b;
  b.id = id;
  read(j, "alpha", b.alpha);
  read(j, "min_bits", b.min_bits);
  read(j, "tests", b.tests);
  read(j, "block_frequency_m", b.block_frequency_m);
  read(j, "serial_m", b.serial_m);
  read(j, "approximate_entropy_m", b.approximate_entropy_m);
  read(j, "min_test_bits", b.min_test_bits);
  read(j, "parallel", b.parallel);
  return b;
}

json battery_json(const BatteryConfig& b) {
  return json{{"alpha", b.alpha},
              {"min_bits", b.min_bits},
              {"tests", b.tests},
              {"block_frequency_m", b.block_frequency_m},
              {"serial_m", b.serial_m},
              {"approximate_entropy_m", b.approximate_entropy_m},
              {"min_test_bits", b.min_test_bits},
              {"parallel", b.parallel}};
}

}  // namespace

RunConfig::RunConfig() {
  service.listen = net::Endpoint{"127.0.0.1", 7451};
  service.criteria = net::ServiceConfig::default_criteria();
}

void RunConfig::validate() const {
  scheme.validate();
  require(0.0 <= balance_lo && balance_lo <= balance_hi && balance_hi <= 1.0, ErrorCode::config,
          "balance bounds must satisfy 0 <= lo <= hi <= 1");
  require(control_interval > 0.0, ErrorCode::config, "control_interval must be > 0");
  require(control_interval * scheme.pulse_rate >= 1.0, ErrorCode::config,
          "control interval shorter than one pulse");
  require(max_intervals >= 1, ErrorCode::config, "max_intervals must be >= 1");
  require(target_bits >= 1, ErrorCode::config, "target_bits must be >= 1");
  require(threads >= 1, ErrorCode::config, "threads must be >= 1");
  require(verifier.max_submissions >= 1, ErrorCode::config, "max_submissions must be >= 1");
  require(verifier.timeout > 0.0, ErrorCode::config, "verifier timeout must be > 0");
  if (verifier.endpoint != "loopback") net::Endpoint::parse(verifier.endpoint);
  if (audit.endpoint) net::Endpoint::parse(*audit.endpoint);
  require(extraction.epsilon > 0.0 && extraction.epsilon < 1.0, ErrorCode::config, "epsilon must lie in (0,1)");
  require(extraction.block_bits >= 1, ErrorCode::config, "block_bits must be >= 1");
  require(!service.criteria.empty(), ErrorCode::config, "criteria registry is empty");
  for (const auto& [id, b] : service.criteria) b.validate();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  try {
    const json root = json::parse(text);
    only_keys(root, "config",
              {"scheme", "balance", "control_interval", "max_intervals", "target_bits", "threads", "verifier",
               "audit", "extraction", "output_dir", "service"});
    if (root.contains("scheme")) {
      const json& s = root["scheme"];
      only_keys(s, "scheme",
                {"type", "pulse_rate", "channel_probs", "noise", "dead_time", "bin_spacing", "drift", "seed"});
      if (s.contains("type")) cfg.scheme.scheme = parse_scheme(s["type"].get<std::string>());
      read(s, "pulse_rate", cfg.scheme.pulse_rate);
      if (s.contains("channel_probs")) {
        const auto p = s["channel_probs"].get<std::vector<double>>();
        require(p.size() == kOutcomes, ErrorCode::config, "channel_probs needs four entries");
        std::copy(p.begin(), p.end(), cfg.scheme.channel_probs.p.begin());
      }
      read(s, "dead_time", cfg.scheme.dead_time);
      read(s, "bin_spacing", cfg.scheme.bin_spacing);
      read(s, "seed", cfg.scheme.seed);
      if (s.contains("noise")) {
        const json& n = s["noise"];
        only_keys(n, "scheme.noise", {"mu", "eta", "dark_prob", "channels", "truncation"});
        read(n, "mu", cfg.scheme.noise.mu);
        read(n, "eta", cfg.scheme.noise.eta);
        read(n, "dark_prob", cfg.scheme.noise.dark_prob);
        read(n, "channels", cfg.scheme.noise.channels);
        read(n, "truncation", cfg.scheme.noise.truncation);
      }
      if (s.contains("drift")) {
        const json& d = s["drift"];
        only_keys(d, "scheme.drift", {"mode", "correlation_time", "amplitude", "step"});
        if (d.contains("mode")) cfg.scheme.drift.mode = parse_drift_mode(d["mode"].get<std::string>());
        read(d, "correlation_time", cfg.scheme.drift.correlation_time);
        read(d, "amplitude", cfg.scheme.drift.amplitude);
        read(d, "step", cfg.scheme.drift.step);
      }
    }
    if (root.contains("balance")) {
      only_keys(root["balance"], "balance", {"lo", "hi"});
      read(root["balance"], "lo", cfg.balance_lo);
      read(root["balance"], "hi", cfg.balance_hi);
    }
    read(root, "control_interval", cfg.control_interval);
    read(root, "max_intervals", cfg.max_intervals);
    read(root, "target_bits", cfg.target_bits);
    read(root, "threads", cfg.threads);
    if (root.contains("verifier")) {
      const json& v = root["verifier"];
      only_keys(v, "verifier", {"endpoint", "criteria_id", "device_token", "timeout", "max_submissions"});
      read(v, "endpoint", cfg.verifier.endpoint);
      read(v, "criteria_id", cfg.verifier.criteria_id);
      read(v, "device_token", cfg.verifier.device_token);
      read(v, "timeout", cfg.verifier.timeout);
      read(v, "max_submissions", cfg.verifier.max_submissions);
    }
    if (root.contains("audit")) {
      const json& a = root["audit"];
      only_keys(a, "audit", {"enabled", "endpoint"});
      read(a, "enabled", cfg.audit.enabled);
      if (a.contains("endpoint") && !a["endpoint"].is_null()) cfg.audit.endpoint = a["endpoint"].get<std::string>();
    }
    if (root.contains("extraction")) {
      const json& e = root["extraction"];
      only_keys(e, "extraction", {"epsilon", "block_bits", "seed"});
      read(e, "epsilon", cfg.extraction.epsilon);
      read(e, "block_bits", cfg.extraction.block_bits);
      if (e.contains("seed") && !e["seed"].is_null()) cfg.extraction.seed = e["seed"].get<std::uint64_t>();
    }
    if (root.contains("output_dir")) cfg.output_dir = root["output_dir"].get<std::string>();
    if (root.contains("service")) {
      const json& s = root["service"];
      only_keys(s, "service", {"listen", "storage", "max_sessions", "max_payload", "io_timeout", "tokens", "criteria"});
      if (s.contains("listen")) cfg.service.listen = net::Endpoint::parse(s["listen"].get<std::string>());
      if (s.contains("storage")) cfg.service.storage = s["storage"].get<std::string>();
      read(s, "max_sessions", cfg.service.max_sessions);
      read(s, "max_payload", cfg.service.max_payload);
      read(s, "io_timeout", cfg.service.io_timeout);
      if (s.contains("tokens")) {
        const json& t = s["tokens"];
        only_keys(t, "service.tokens", {"device", "auditor", "reader"});
        read(t, "device", cfg.service.tokens.device);
        read(t, "auditor", cfg.service.tokens.auditor);
        read(t, "reader", cfg.service.tokens.reader);
      }
      if (s.contains("criteria")) {
        cfg.service.criteria.clear();
        for (const auto& [id, b] : s["criteria"].items()) cfg.service.criteria[id] = parse_battery(b, id);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("malformed configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(io::read_text(path)); }

std::string run_config_to_json(const RunConfig& cfg) {
  const auto& s = cfg.scheme;
  json criteria = json::object();
  for (const auto& [id, b] : cfg.service.criteria) criteria[id] = battery_json(b);
  json j{
      {"scheme",
       {{"type", to_string(s.scheme)},
        {"pulse_rate", s.pulse_rate},
        {"channel_probs", s.channel_probs.p},
        {"noise",
         {{"mu", s.noise.mu},
          {"eta", s.noise.eta},
          {"dark_prob", s.noise.dark_prob},
          {"channels", s.noise.channels},
          {"truncation", s.noise.truncation}}},
        {"dead_time", s.dead_time},
        {"bin_spacing", s.bin_spacing},
        {"drift",
         {{"mode", to_string(s.drift.mode)},
          {"correlation_time", s.drift.correlation_time},
          {"amplitude", s.drift.amplitude},
          {"step", s.drift.step}}},
        {"seed", s.seed}}},
      {"balance", {{"lo", cfg.balance_lo}, {"hi", cfg.balance_hi}}},
      {"control_interval", cfg.control_interval},
      {"max_intervals", cfg.max_intervals},
      {"target_bits", cfg.target_bits},
      {"threads", cfg.threads},
      {"verifier",
       {{"endpoint", cfg.verifier.endpoint},
        {"criteria_id", cfg.verifier.criteria_id},
        {"device_token", cfg.verifier.device_token},
        {"timeout", cfg.verifier.timeout},
        {"max_submissions", cfg.verifier.max_submissions}}},
      {"audit", {{"enabled", cfg.audit.enabled}, {"endpoint", cfg.audit.endpoint ? json(*cfg.audit.endpoint) : json()}}},
      {"extraction",
       {{"epsilon", cfg.extraction.epsilon},
        {"block_bits", cfg.extraction.block_bits},
        {"seed", cfg.extraction.seed ? json(*cfg.extraction.seed) : json()}}},
      {"output_dir", cfg.output_dir.string()},
      {"service",
       {{"listen", cfg.service.listen.to_string()},
        {"storage", cfg.service.storage.string()},
        {"max_sessions", cfg.service.max_sessions},
        {"max_payload", cfg.service.max_payload},
        {"io_timeout", cfg.service.io_timeout},
        {"tokens",
         {{"device", cfg.service.tokens.device},
          {"auditor", cfg.service.tokens.auditor},
          {"reader", cfg.service.tokens.reader}}},
        {"criteria", criteria}}}};
  return j.dump(2);
}

}  // namespace qrng

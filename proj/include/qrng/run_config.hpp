#pragma once

// Run configuration shared by every CLI subcommand. Loaded from one JSON
// file; unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "qrng/extractor.hpp"
#include "qrng/net/socket.hpp"
#include "qrng/net/verifier_service.hpp"
#include "qrng/optics_sim.hpp"

namespace qrng {

struct VerifierSettings {
  std::string endpoint = "loopback";  ///< "loopback" or host:port
  std::string criteria_id = "default";
  std::string device_token = "device-token";
  double timeout = 120.0;
  int max_submissions = 3;
};

struct AuditSettings {
  bool enabled = true;
  std::optional<std::string> endpoint;  ///< host:port; defaults to the verifier
};

struct ExtractionSettings {
  double epsilon = 0x1.0p-100;
  std::uint64_t block_bits = kDefaultBlockBits;
  std::optional<std::uint64_t> seed;  ///< unset: drawn from std::random_device
};

struct RunConfig {
  SchemeConfig scheme;
  double balance_lo = 0.24;
  double balance_hi = 0.26;
  double control_interval = 1.0;
  std::uint64_t max_intervals = 100;
  std::uint64_t target_bits = 1'000'000;
  unsigned threads = 1;
  VerifierSettings verifier;
  AuditSettings audit;
  ExtractionSettings extraction;
  std::filesystem::path output_dir = "qrng-run";
  net::ServiceConfig service;

  RunConfig();
  /// Throws ErrorCode::config / parameter_domain.
  void validate() const;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace qrng

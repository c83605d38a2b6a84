#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "midas/cache/cache.hpp"
#include "midas/control/control.hpp"
#include "midas/core/time.hpp"

namespace midas::sim {

/// Configuration rejection with the offending field's path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Pattern { kLight, kBursty, kPeriodic, kDiurnal, kSkewedZipf };
enum class Scheduler { kRoundRobin, kMidas };
enum class ServiceModel { kConstant, kExponential };

const char* pattern_name(Pattern p);
const char* scheduler_name(Scheduler s);

struct WorkloadSpec {
  Pattern pattern = Pattern::kLight;
  MicroTime duration_us = 60 * kMicrosPerSecond;
  double base_rate_per_s = 100.0;  // peak rate for the diurnal pattern
  double burst_amplitude = 100.0;
  MicroTime burst_len_us = 3 * kMicrosPerSecond;
  MicroTime burst_gap_us = 27 * kMicrosPerSecond;
  MicroTime period_us = 60 * kMicrosPerSecond;
  double depth = 0.8;          // sinusoidal modulation depth, in [0, 1)
  MicroTime day_us = 240 * kMicrosPerSecond;
  double trough_ratio = 0.2;   // diurnal min rate / peak rate
  double zipf_s = 0.0;
  std::int64_t key_universe = 4096;
  int dirs = 64;
  double write_fraction = 0.05;
};

struct ServiceSpec {
  ServiceModel model = ServiceModel::kConstant;
  std::vector<double> constant_ms = {100.0};  // broadcast if size 1
  std::vector<double> rate_per_s = {10.0};

  double constant_ms_for(int server) const {
    return constant_ms[constant_ms.size() == 1
                           ? 0
                           : static_cast<std::size_t>(server)];
  }
  double rate_for(int server) const {
    return rate_per_s[rate_per_s.size() == 1 ? 0
                                             : static_cast<std::size_t>(server)];
  }
  /// Aggregate service capacity in requests per second.
  double total_capacity_per_s(int servers) const;
};

struct RoutingSpec {
  int k_f = 4;
  int vnodes_per_server = 64;
  double constrained_fraction = 0.0;  // keys with singleton feasible sets
};

struct ControlSpec {
  control::ControlDefaults defaults;
  MicroTime warmup_us = 60 * kMicrosPerSecond;
  double warmup_utilization = 0.30;
};

struct CacheSpec {
  cache::CacheMode mode = cache::CacheMode::kOff;
  std::size_t capacity = 64 * 1024;
  double lease_ms = 30000.0;
  double ttl_max_ms = 30000.0;
  std::optional<double> ttl_min_ms;  // defaults to one RTT
  double p_star = 1e-4;
  double gamma = 0.5;
  double w_high = 0.3;
  int class_prefix_depth = 1;
  double proxy_service_ms = 0.1;  // local completion time for cache hits
};

enum class QueueTraceMode { kDense, kTicks };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int servers = 8;
  int proxies = 1;
  double rtt_ms = 1.0;
  Scheduler scheduler = Scheduler::kMidas;
  WorkloadSpec workload;
  ServiceSpec service;
  RoutingSpec routing;
  ControlSpec control;
  CacheSpec cache;
  QueueTraceMode queue_trace = QueueTraceMode::kDense;
  bool keep_traces = false;  // retain per-request vectors in the RunResult

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

/// Strict parse: unknown fields anywhere are rejected with their path,
/// as are type and range violations. `seed_override` (from the CLI)
/// takes precedence over the file's seed.
ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override);

ExperimentConfig parse_config_json(const std::string& text,
                                   std::optional<std::uint64_t> seed_override);

/// Canonical JSON echo of a config (written into every run directory).
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace midas::sim

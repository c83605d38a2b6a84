#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midas/control/control.hpp"
#include "midas/core/rng.hpp"
#include "midas/core/time.hpp"

namespace midas::metrics {

struct PerServerStats {
  std::int64_t queue_integral_qus = 0;  // integral of q over the main window
  int max_queue = 0;
  std::int64_t arrivals = 0;
  std::int64_t completions = 0;
  double time_avg_queue = 0.0;
};

/// Compact record of one routing decision, kept for the in-memory
/// invariant validators. CSV rows carry the same fields.
struct DecisionRecord {
  MicroTime time = 0;
  int proxy = 0;
  bool eligible = false;
  bool steered = false;
  double lhat_primary = 0.0;
  double lhat_chosen = 0.0;
  int delta_l = 0;
  std::uint64_t shard = 0;
};

struct RunResult {
  std::string scheduler;
  std::string workload_pattern;
  std::uint64_t seed = 0;
  MicroTime main_start_us = 0;
  MicroTime main_end_us = 0;

  std::vector<PerServerStats> servers;
  double mean_queue = 0.0;
  int max_queue = 0;
  double dispersion = 0.0;

  std::int64_t arrivals = 0;     // main-phase requests emitted
  std::int64_t completed = 0;    // responses delivered (cache hits included)
  std::int64_t in_system_at_end = 0;
  double latency_p50_ms = 0.0;
  double latency_p99_ms = 0.0;
  double latency_mean_ms = 0.0;

  std::int64_t sojourn_count = 0;  // server-side wait + service samples
  double sojourn_mean_ms = 0.0;

  std::int64_t cache_hits = 0;
  std::int64_t cache_misses = 0;
  std::int64_t stale_serves = 0;

  std::int64_t decisions = 0;
  std::int64_t steered = 0;
  std::int64_t eligible = 0;
  std::int64_t pins_created = 0;
  std::int64_t pin_hits = 0;

  std::int64_t lyapunov_violations = 0;
  std::int64_t budget_violations = 0;
  std::int64_t pin_violations = 0;

  control::ControlTargets targets;
  int escalations = 0;
  int deescalations = 0;
  double max_pressure = 0.0;
  MicroTime last_tick_above_h_up = -1;  // -1: pressure never crossed H_up

  std::uint64_t arrival_hash = 0;
  std::uint64_t decision_hash = 0;

  // Retained only when ExperimentConfig::keep_traces is set.
  std::vector<MicroTime> latencies_us;
  std::vector<DecisionRecord> decision_log;
  std::vector<std::pair<MicroTime, double>> pressure_trace;
};

/// Coefficient of variation of per-server time-averaged queue lengths.
/// A zero mean (idle run) defines dispersion as zero.
double dispersion(const std::vector<PerServerStats>& servers);

struct ComparisonReport {
  double mean_queue_reduction = 0.0;   // 1 - midas/baseline
  double worst_case_reduction = 0.0;   // 1 - midas_max/baseline_max
  double dispersion_baseline = 0.0;
  double dispersion_midas = 0.0;
  double mean_queue_baseline = 0.0;
  double mean_queue_midas = 0.0;
  int max_queue_baseline = 0;
  int max_queue_midas = 0;
};

/// Requires both runs to have consumed the identical arrival stream
/// (verified by hash); throws std::invalid_argument otherwise.
ComparisonReport compare(const RunResult& baseline, const RunResult& midas);

/// Max load per trial of the balls-into-bins process: d = 1 places each
/// ball uniformly, d >= 2 places it in the least-loaded of d uniform
/// samples (ties to the first minimum).
std::vector<int> balls_into_bins_max_loads(int bins, int balls, int d,
                                           int trials, Rng& rng);

/// Offline reroute-cap checker: scans every distinct sliding window of
/// length `window_us` per proxy and counts windows where
/// steered > f_max * eligible + 1. Records must be time-sorted.
std::int64_t budget_window_violations(
    const std::vector<DecisionRecord>& records, MicroTime window_us,
    double f_max);

/// Counts steered decisions whose recorded snapshot does not satisfy
/// delta_v(lhat_p, lhat_j, 1) <= -2 (with a 1e-9 float guard).
std::int64_t lyapunov_violations(const std::vector<DecisionRecord>& records);

/// Recomputed view of a run directory's raw CSVs, for the
/// summary-consistency check.
struct RecomputedSummary {
  std::vector<PerServerStats> servers;
  double mean_queue = 0.0;
  int max_queue = 0;
  double dispersion = 0.0;
  std::int64_t arrivals = 0;
  std::uint64_t arrival_hash = 0;
  std::int64_t decisions = 0;
  std::int64_t steered = 0;
  std::int64_t eligible = 0;
  double latency_p50_ms = 0.0;
  double latency_p99_ms = 0.0;
  std::int64_t completed = 0;
};

/// Rebuild summary statistics from a run directory written with dense
/// traces. Throws on missing files.
RecomputedSummary recompute_from_csv(const std::string& run_dir);

/// FNV-1a over a file's bytes (the hash CSV sinks accumulate while
/// writing). Used for determinism comparisons.
std::uint64_t file_fnv64(const std::string& path);

}  // namespace midas::metrics

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midas/metrics/metrics.hpp"
#include "midas/sim/config.hpp"

namespace midas::suite {

struct CriterionResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string details;
};

struct ScenarioOutcome {
  std::string workload;
  std::uint64_t seed = 0;
  metrics::RunResult baseline;
  metrics::RunResult midas;
  metrics::ComparisonReport report;
};

struct ReproduceOptions {
  std::string config_dir;
  std::string out_dir;  // empty: no CSV output, in-memory evaluation only
};

struct ReproduceReport {
  std::vector<ScenarioOutcome> scenarios;
  std::vector<CriterionResult> criteria;
  bool all_pass = false;
  double elapsed_seconds = 0.0;
  std::string table_text;
};

/// Run the five committed workloads for both schedulers across the fixed
/// seed set and evaluate every acceptance criterion.
ReproduceReport run_reproduction(const ReproduceOptions& opts);

std::string render_table(const ReproduceReport& report);

struct TheoryCheck {
  std::string name;
  bool pass = false;
  std::string details;
};

struct TheoryReport {
  std::vector<TheoryCheck> checks;
  bool all_pass = false;
};

/// Balls-into-bins max-load bands plus the single-queue sojourn check.
/// lambda must be < mu.
TheoryReport run_theory_checks(double lambda_per_s, double mu_per_s,
                               std::int64_t mm1_arrivals, int bins_trials);

/// Build the single-queue validation experiment used by the sojourn
/// check (one server, exponential service, sparse telemetry ticks).
sim::ExperimentConfig make_mm1_config(double lambda_per_s, double mu_per_s,
                                      std::int64_t arrivals);

}  // namespace midas::suite

#pragma once

#include <string>

#include "midas/metrics/metrics.hpp"
#include "midas/sim/config.hpp"

namespace midas::sim {

/// Run one experiment: optional warmup (midas only), then the main
/// phase. Fully deterministic in (config, seed). When `out_dir` is
/// non-empty the run writes its CSV logs, config echo, and summary
/// there; the directory must already exist.
metrics::RunResult run_experiment(const ExperimentConfig& config,
                                  const std::string& out_dir = "");

/// Serialize a run summary (the same document written to summary.json).
std::string summary_to_json(const metrics::RunResult& result);

}  // namespace midas::sim

#include "doctest.h"

#include <filesystem>

#include "midas/core/rng.hpp"
#include "midas/metrics/metrics.hpp"
#include "midas/sim/experiment.hpp"

using namespace midas;
using namespace midas::metrics;

namespace {

std::vector<PerServerStats> averages(std::vector<double> v) {
  std::vector<PerServerStats> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i].time_avg_queue = v[i];
  return out;
}

RunResult result_with(double mean_q, int max_q, std::uint64_t hash) {
  RunResult r;
  r.mean_queue = mean_q;
  r.max_queue = max_q;
  r.arrival_hash = hash;
  r.servers = averages({mean_q});
  return r;
}

}  // namespace

TEST_CASE("dispersion hand values") {
  CHECK(dispersion(averages({3, 3, 3, 3})) == doctest::Approx(0.0));
  CHECK(dispersion(averages({0, 10})) == doctest::Approx(1.0));
  CHECK(dispersion(averages({5})) == doctest::Approx(0.0));
  CHECK(dispersion(averages({0, 0, 0})) == doctest::Approx(0.0));
}

TEST_CASE("adding constant load strictly lowers dispersion") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v, shifted;
    bool flat = true;
    for (int i = 0; i < 8; ++i) {
      double x = rng.uniform_range(0.0, 10.0);
      v.push_back(x);
      shifted.push_back(x + 5.0);
      if (i > 0 && x != v[0]) flat = false;
    }
    if (flat) continue;
    CHECK(dispersion(averages(shifted)) < dispersion(averages(v)));
  }
}

TEST_CASE("compare arithmetic and stream guard") {
  auto rep = compare(result_with(10.0, 100, 42), result_with(7.7, 20, 42));
  CHECK(rep.mean_queue_reduction == doctest::Approx(0.23));
  CHECK(rep.worst_case_reduction == doctest::Approx(0.80));

  auto self = compare(result_with(5.0, 50, 7), result_with(5.0, 50, 7));
  CHECK(self.mean_queue_reduction == doctest::Approx(0.0));
  CHECK(self.worst_case_reduction == doctest::Approx(0.0));

  CHECK_THROWS_AS(compare(result_with(1, 1, 1), result_with(1, 1, 2)),
                  std::invalid_argument);
}

TEST_CASE("balls into bins: single bin and two-choice dominance") {
  Rng rng(13);
  auto single = balls_into_bins_max_loads(1, 57, 1, 3, rng);
  for (int mx : single) CHECK(mx == 57);

  Rng r1 = Rng(13).substream("d1");
  Rng r2 = Rng(13).substream("d2");
  auto d1 = balls_into_bins_max_loads(1000, 1000, 1, 10, r1);
  auto d2 = balls_into_bins_max_loads(1000, 1000, 2, 10, r2);
  int dominated = 0;
  for (std::size_t i = 0; i < d1.size(); ++i)
    if (d2[i] < d1[i]) ++dominated;
  CHECK(dominated == 10);
}

TEST_CASE("budget window checker flags a burst over the cap") {
  std::vector<DecisionRecord> log;
  auto ev = [&](MicroTime t, bool steer) {
    DecisionRecord r;
    r.time = t;
    r.eligible = true;
    r.steered = steer;
    log.push_back(r);
  };
  // Two steers out of two eligibles in one window: 2 > 0.1 * 2 + 1.
  ev(0, true);
  ev(100000, true);
  CHECK(budget_window_violations(log, 1000000, 0.1) > 0);

  std::vector<DecisionRecord> ok;
  log.clear();
  ev(0, true);
  for (int i = 1; i <= 20; ++i) ev(i * 10000, false);
  ev(2000000, true);
  CHECK(budget_window_violations(log, 1000000, 0.1) == 0);
}

TEST_CASE("lyapunov checker uses the recorded snapshot values") {
  std::vector<DecisionRecord> log;
  DecisionRecord r;
  r.eligible = true;
  r.steered = true;
  r.lhat_primary = 10.0;
  r.lhat_chosen = 8.0;  // gap exactly 2: delta_v = -2, allowed
  log.push_back(r);
  CHECK(lyapunov_violations(log) == 0);

  r.lhat_chosen = 8.6;  // gap 1.4: delta_v = -0.8, violation
  log.push_back(r);
  CHECK(lyapunov_violations(log) == 1);
}

TEST_CASE("summary statistics recompute exactly from the raw csv logs") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "midas-recompute-test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  sim::ExperimentConfig cfg;
  cfg.seed = 31;
  cfg.servers = 4;
  cfg.scheduler = sim::Scheduler::kMidas;
  cfg.workload.pattern = sim::Pattern::kBursty;
  cfg.workload.duration_us = 20 * kMicrosPerSecond;
  cfg.workload.base_rate_per_s = 20.0;
  cfg.workload.burst_amplitude = 10.0;
  cfg.workload.burst_len_us = 2 * kMicrosPerSecond;
  cfg.workload.burst_gap_us = 6 * kMicrosPerSecond;
  cfg.workload.zipf_s = 1.0;
  cfg.workload.write_fraction = 0.1;
  cfg.control.warmup_us = 5 * kMicrosPerSecond;
  cfg.cache.mode = cache::CacheMode::kLease;
  cfg.queue_trace = sim::QueueTraceMode::kDense;

  auto result = sim::run_experiment(cfg, dir.string());
  auto re = recompute_from_csv(dir.string());

  CHECK(re.mean_queue == result.mean_queue);
  CHECK(re.max_queue == result.max_queue);
  CHECK(re.dispersion == result.dispersion);
  CHECK(re.arrivals == result.arrivals);
  CHECK(re.arrival_hash == result.arrival_hash);
  CHECK(re.decisions == result.decisions);
  CHECK(re.steered == result.steered);
  CHECK(re.eligible == result.eligible);
  CHECK(re.completed == result.completed);
  CHECK(re.latency_p50_ms == result.latency_p50_ms);
  CHECK(re.latency_p99_ms == result.latency_p99_ms);
  REQUIRE(re.servers.size() == result.servers.size());
  for (std::size_t i = 0; i < re.servers.size(); ++i) {
    CHECK(re.servers[i].queue_integral_qus ==
          result.servers[i].queue_integral_qus);
    CHECK(re.servers[i].time_avg_queue == result.servers[i].time_avg_queue);
    CHECK(re.servers[i].max_queue == result.servers[i].max_queue);
  }
  fs::remove_all(dir);
}

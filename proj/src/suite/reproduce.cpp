#include "midas/suite/reproduce.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>

#include "midas/control/control.hpp"
#include "midas/core/rng.hpp"
#include "midas/sim/experiment.hpp"

namespace midas::suite {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};
constexpr const char* kWorkloads[] = {"light", "bursty", "periodic",
                                      "diurnal", "skewed"};

std::string pct(double frac) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", frac * 100.0);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

std::string run_dir_for(const ReproduceOptions& opts,
                        const std::string& workload, std::uint64_t seed,
                        const char* sched) {
  if (opts.out_dir.empty()) return "";
  std::string dir = opts.out_dir + "/" + workload + "_s" +
                    std::to_string(seed) + "_" + sched;
  fs::create_directories(dir);
  return dir;
}

struct WorkloadAgg {
  std::vector<double> reductions;
  std::vector<double> max_reductions;
  std::vector<double> disp_rr;
  std::vector<double> disp_midas;
  std::vector<double> mean_rr;
  std::vector<double> mean_midas;
};

CriterionResult check_hysteresis() {
  CriterionResult c;
  c.id = "C6";
  c.name = "hysteresis no-chatter and exact escalation tick";

  control::ControlDefaults defaults;
  Rng jitter = Rng(42).substream("jitter");

  control::Controller quiet(defaults, 1.0);
  // Oscillation strictly inside the deadband must never move a knob.
  const double inside[] = {0.05, 0.09, 0.025, 0.075, 0.095, 0.03};
  for (int i = 0; i < 10000; ++i)
    quiet.fast_tick(inside[i % 6], jitter);
  bool no_chatter =
      quiet.escalations() == 0 && quiet.deescalations() == 0 &&
      quiet.knobs().d == defaults.d0 &&
      quiet.knobs().delta_l == defaults.delta_l0;

  control::Controller step(defaults, 1.0);
  int first_fire_tick = -1;
  for (int tick = 1; tick <= 10; ++tick) {
    step.fast_tick(0.2, jitter);
    if (first_fire_tick < 0 && step.escalations() > 0) first_fire_tick = tick;
  }
  bool exact = first_fire_tick == defaults.k_up;

  c.pass = no_chatter && exact;
  c.details = "in-band 1e4 ticks: " +
              std::to_string(quiet.escalations() + quiet.deescalations()) +
              " knob changes; step to P=0.2 first escalation at tick " +
              std::to_string(first_fire_tick);
  return c;
}

CriterionResult check_determinism(const ReproduceOptions& opts) {
  CriterionResult c;
  c.id = "C10";
  c.name = "byte-identical CSV outputs at a fixed seed";

  sim::ExperimentConfig cfg =
      sim::load_config(opts.config_dir + "/bursty.json", 7);
  cfg.workload.duration_us = 60 * kMicrosPerSecond;

  fs::path base = opts.out_dir.empty()
                      ? fs::temp_directory_path() / "midas-determinism"
                      : fs::path(opts.out_dir) / "determinism";
  fs::remove_all(base);
  fs::create_directories(base / "a");
  fs::create_directories(base / "b");
  sim::run_experiment(cfg, (base / "a").string());
  sim::run_experiment(cfg, (base / "b").string());

  const char* files[] = {"arrivals.csv",  "queues.csv",   "telemetry.csv",
                         "decisions.csv", "control.csv",  "cache.csv",
                         "latencies.csv", "summary.json", "config.json"};
  bool all_equal = true;
  std::string first_diff;
  for (const char* f : files) {
    std::uint64_t ha = metrics::file_fnv64((base / "a" / f).string());
    std::uint64_t hb = metrics::file_fnv64((base / "b" / f).string());
    if (ha != hb) {
      all_equal = false;
      if (first_diff.empty()) first_diff = f;
    }
  }
  if (opts.out_dir.empty()) fs::remove_all(base);

  c.pass = all_equal;
  c.details = all_equal ? "9/9 files identical across reruns"
                        : "first differing file: " + first_diff;
  return c;
}

CriterionResult check_staleness(const ReproduceOptions& opts) {
  CriterionResult c;
  c.id = "C9";
  c.name = "TTL stale-serve bound and lease zero-staleness";

  auto ttl_cfg = sim::load_config(opts.config_dir + "/staleness_ttl.json",
                                  std::nullopt);
  auto lease_cfg = sim::load_config(opts.config_dir + "/staleness_lease.json",
                                    std::nullopt);
  auto ttl = sim::run_experiment(ttl_cfg);
  auto lease = sim::run_experiment(lease_cfg);

  std::int64_t ttl_lookups = ttl.cache_hits + ttl.cache_misses;
  std::int64_t lease_lookups = lease.cache_hits + lease.cache_misses;
  double stale_frac =
      ttl_lookups > 0 ? static_cast<double>(ttl.stale_serves) /
                            static_cast<double>(ttl_lookups)
                      : 1.0;
  double bound = 2.0 * ttl_cfg.cache.p_star;

  bool ttl_ok = ttl_lookups >= 1000000 && stale_frac <= bound;
  bool lease_ok = lease_lookups >= 1000000 && lease.stale_serves == 0;
  c.pass = ttl_ok && lease_ok;

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "ttl: %lld lookups, stale %.3g (bound %.3g); lease: %lld "
                "lookups, stale %lld",
                static_cast<long long>(ttl_lookups), stale_frac, bound,
                static_cast<long long>(lease_lookups),
                static_cast<long long>(lease.stale_serves));
  c.details = buf;
  return c;
}

}  // namespace

sim::ExperimentConfig make_mm1_config(double lambda_per_s, double mu_per_s,
                                      std::int64_t arrivals) {
  sim::ExperimentConfig cfg;
  cfg.seed = 90125;
  cfg.servers = 1;
  cfg.proxies = 1;
  cfg.scheduler = sim::Scheduler::kRoundRobin;
  cfg.workload.pattern = sim::Pattern::kLight;
  cfg.workload.base_rate_per_s = lambda_per_s;
  cfg.workload.duration_us = seconds_to_us(
      static_cast<double>(arrivals) / lambda_per_s);
  cfg.workload.key_universe = 1024;
  cfg.workload.write_fraction = 0.0;
  cfg.service.model = sim::ServiceModel::kExponential;
  cfg.service.rate_per_s = {mu_per_s};
  cfg.cache.mode = cache::CacheMode::kOff;
  cfg.queue_trace = sim::QueueTraceMode::kTicks;
  // Telemetry is irrelevant here; sparse ticks keep the run light.
  cfg.control.defaults.t_fast_us = 60 * kMicrosPerSecond;
  cfg.control.defaults.t_slow_us = 600 * kMicrosPerSecond;
  cfg.control.defaults.pin_duration_us = 60 * kMicrosPerSecond;
  return cfg;
}

TheoryReport run_theory_checks(double lambda_per_s, double mu_per_s,
                               std::int64_t mm1_arrivals, int bins_trials) {
  if (!(lambda_per_s < mu_per_s))
    throw sim::ConfigError("check-theory.lambda",
                           "unstable queue: requires lambda < mu");
  TheoryReport rep;

  Rng d1_rng = Rng(20260809).substream("bins.d1");
  Rng d2_rng = Rng(20260809).substream("bins.d2");
  auto d1 = metrics::balls_into_bins_max_loads(10000, 10000, 1, bins_trials,
                                               d1_rng);
  auto d2 = metrics::balls_into_bins_max_loads(10000, 10000, 2, bins_trials,
                                               d2_rng);
  auto median_int = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  int med1 = median_int(d1);
  int med2 = median_int(d2);

  {
    TheoryCheck ck;
    ck.name = "uniform placement max load (d=1)";
    ck.pass = med1 >= 6 && med1 <= 12;
    ck.details = "median max load " + std::to_string(med1) +
                 ", expected band [6, 12]";
    rep.checks.push_back(ck);
  }
  {
    TheoryCheck ck;
    ck.name = "two-choice placement max load (d=2)";
    ck.pass = med2 <= 5;
    ck.details = "median max load " + std::to_string(med2) + ", bound 5";
    rep.checks.push_back(ck);
  }
  {
    TheoryCheck ck;
    ck.name = "pairwise dominance d=2 < d=1";
    int dominated = 0;
    for (std::size_t i = 0; i < d1.size(); ++i)
      if (d2[i] < d1[i]) ++dominated;
    ck.pass = dominated == static_cast<int>(d1.size());
    ck.details = std::to_string(dominated) + "/" +
                 std::to_string(d1.size()) + " trials dominated";
    rep.checks.push_back(ck);
  }
  {
    TheoryCheck ck;
    ck.name = "single-queue mean sojourn vs 1/(mu-lambda)";
    auto cfg = make_mm1_config(lambda_per_s, mu_per_s, mm1_arrivals);
    auto result = sim::run_experiment(cfg);
    double expected_ms = 1000.0 / (mu_per_s - lambda_per_s);
    double rel = std::abs(result.sojourn_mean_ms - expected_ms) / expected_ms;
    ck.pass = rel <= 0.05;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mean sojourn %.3f ms vs %.3f ms (rel err %.2f%%, n=%lld)",
                  result.sojourn_mean_ms, expected_ms, rel * 100.0,
                  static_cast<long long>(result.sojourn_count));
    ck.details = buf;
    rep.checks.push_back(ck);
  }

  rep.all_pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                             [](const TheoryCheck& c) { return c.pass; });
  return rep;
}

std::string render_table(const ReproduceReport& report) {
  std::map<std::string, WorkloadAgg> agg;
  for (const auto& s : report.scenarios) {
    auto& a = agg[s.workload];
    a.reductions.push_back(s.report.mean_queue_reduction);
    a.max_reductions.push_back(s.report.worst_case_reduction);
    a.disp_rr.push_back(s.report.dispersion_baseline);
    a.disp_midas.push_back(s.report.dispersion_midas);
    a.mean_rr.push_back(s.report.mean_queue_baseline);
    a.mean_midas.push_back(s.report.mean_queue_midas);
  }

  std::string out;
  out +=
      "workload   rr_mean_q  midas_mean_q  mean_red   worst_red   "
      "disp_rr  disp_midas\n";
  for (const char* wl : kWorkloads) {
    auto it = agg.find(wl);
    if (it == agg.end()) continue;
    const auto& a = it->second;
    char row[200];
    std::snprintf(row, sizeof(row),
                  "%-10s %9.3f  %12.3f  %8s  %9s  %7.3f  %10.3f\n", wl,
                  mean_of(a.mean_rr), mean_of(a.mean_midas),
                  pct(mean_of(a.reductions)).c_str(),
                  pct(mean_of(a.max_reductions)).c_str(),
                  mean_of(a.disp_rr), mean_of(a.disp_midas));
    out += row;
  }
  return out;
}

ReproduceReport run_reproduction(const ReproduceOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  ReproduceReport rep;

  std::map<std::string, WorkloadAgg> agg;
  std::int64_t lyapunov = 0;
  std::int64_t budget = 0;
  std::int64_t pins = 0;
  std::int64_t steers_total = 0;
  std::int64_t eligible_total = 0;

  for (const char* wl : kWorkloads) {
    std::string cfg_path = opts.config_dir + "/" + wl + ".json";
    for (std::uint64_t seed : kSeeds) {
      sim::ExperimentConfig base_cfg = sim::load_config(cfg_path, seed);

      sim::ExperimentConfig rr_cfg = base_cfg;
      rr_cfg.scheduler = sim::Scheduler::kRoundRobin;
      auto rr = sim::run_experiment(
          rr_cfg, run_dir_for(opts, wl, seed, "round_robin"));

      sim::ExperimentConfig mid_cfg = base_cfg;
      mid_cfg.scheduler = sim::Scheduler::kMidas;
      auto mid =
          sim::run_experiment(mid_cfg, run_dir_for(opts, wl, seed, "midas"));

      ScenarioOutcome sc;
      sc.workload = wl;
      sc.seed = seed;
      sc.report = metrics::compare(rr, mid);
      sc.baseline = rr;
      sc.midas = mid;

      auto& a = agg[wl];
      a.reductions.push_back(sc.report.mean_queue_reduction);
      a.max_reductions.push_back(sc.report.worst_case_reduction);
      a.disp_rr.push_back(sc.report.dispersion_baseline);
      a.disp_midas.push_back(sc.report.dispersion_midas);
      a.mean_rr.push_back(sc.report.mean_queue_baseline);
      a.mean_midas.push_back(sc.report.mean_queue_midas);

      lyapunov += mid.lyapunov_violations;
      budget += mid.budget_violations;
      pins += mid.pin_violations;
      steers_total += mid.steered;
      eligible_total += mid.eligible;

      rep.scenarios.push_back(std::move(sc));
    }
  }

  // C1: mean queue reduction on the bursty+zipf config.
  {
    CriterionResult c;
    c.id = "C1";
    c.name = "bursty+zipf mean queue reduction (>=15% per seed, >=20% mean)";
    const auto& a = agg["bursty"];
    double worst = *std::min_element(a.reductions.begin(), a.reductions.end());
    double avg = mean_of(a.reductions);
    c.pass = worst >= 0.15 && avg >= 0.20;
    c.details = "per-seed min " + pct(worst) + ", 5-seed mean " + pct(avg);
    rep.criteria.push_back(c);
  }

  // C2: worst-case hotspot mitigation on bursty and diurnal.
  {
    CriterionResult c;
    c.id = "C2";
    c.name = "bursty/diurnal max-queue reduction >=40% on every seed";
    double worst = 1.0;
    for (const char* wl : {"bursty", "diurnal"})
      for (double r : agg[wl].max_reductions) worst = std::min(worst, r);
    c.pass = worst >= 0.40;
    c.details = "worst per-seed max-queue reduction " + pct(worst);
    rep.criteria.push_back(c);
  }

  // C3: dispersion envelope across the suite (5-seed means per workload).
  {
    CriterionResult c;
    c.id = "C3";
    c.name = "dispersion: midas < rr per workload, <=0.50, light <=0.05";
    bool ok = true;
    std::string detail;
    for (const char* wl : kWorkloads) {
      const auto& a = agg[wl];
      double dm = mean_of(a.disp_midas);
      double dr = mean_of(a.disp_rr);
      bool w_ok = dm < dr && dm <= 0.50;
      if (std::string(wl) == "light") w_ok = w_ok && dm <= 0.05;
      ok = ok && w_ok;
      detail += std::string(wl) + " " + fixed3(dm) + "/" + fixed3(dr) +
                (w_ok ? " " : "(FAIL) ");
    }
    c.pass = ok;
    c.details = "midas/rr: " + detail;
    rep.criteria.push_back(c);
  }

  // C4: Lyapunov step invariant across every reproduction run.
  {
    CriterionResult c;
    c.id = "C4";
    c.name = "every steer satisfies delta_v <= -2 on its snapshot";
    c.pass = lyapunov == 0 && steers_total > 0;
    c.details = std::to_string(lyapunov) + " violations over " +
                std::to_string(steers_total) + " steers";
    rep.criteria.push_back(c);
  }

  // C5: reroute cap in every sliding window, plus pin spacing.
  {
    CriterionResult c;
    c.id = "C5";
    c.name = "reroute cap holds in every sliding window";
    c.pass = budget == 0 && pins == 0;
    c.details = std::to_string(budget) + " window violations, " +
                std::to_string(pins) + " pin-spacing violations, " +
                std::to_string(eligible_total) + " eligible decisions";
    rep.criteria.push_back(c);
  }

  rep.criteria.push_back(check_hysteresis());

  // C7/C8: queueing and balls-into-bins theory.
  {
    auto theory = run_theory_checks(5.0, 10.0, 1000000, 30);
    CriterionResult c7;
    c7.id = "C7";
    c7.name = "single-queue sojourn within 5% of 1/(mu-lambda)";
    c7.pass = theory.checks[3].pass;
    c7.details = theory.checks[3].details;
    rep.criteria.push_back(c7);

    CriterionResult c8;
    c8.id = "C8";
    c8.name = "two-choice max load bound and pairwise dominance";
    c8.pass = theory.checks[1].pass && theory.checks[2].pass;
    c8.details = theory.checks[1].details + "; " + theory.checks[2].details;
    rep.criteria.push_back(c8);
  }

  rep.criteria.push_back(check_staleness(opts));
  rep.criteria.push_back(check_determinism(opts));

  auto t1 = std::chrono::steady_clock::now();
  rep.elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();

  {
    CriterionResult c;
    c.id = "C11";
    c.name = "full reproduction wall time under 10 minutes";
    c.pass = rep.elapsed_seconds < 600.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f s elapsed", rep.elapsed_seconds);
    c.details = buf;
    rep.criteria.push_back(c);
  }

  std::sort(rep.criteria.begin(), rep.criteria.end(),
            [](const CriterionResult& a, const CriterionResult& b) {
              auto key = [](const std::string& id) {
                return std::stoi(id.substr(1));
              };
              return key(a.id) < key(b.id);
            });

  rep.all_pass = std::all_of(rep.criteria.begin(), rep.criteria.end(),
                             [](const CriterionResult& c) { return c.pass; });
  rep.table_text = render_table(rep);
  return rep;
}

}  // namespace midas::suite

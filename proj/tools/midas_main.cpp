#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "midas/metrics/metrics.hpp"
#include "midas/sim/config.hpp"
#include "midas/sim/experiment.hpp"
#include "midas/suite/reproduce.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;

std::string default_out_root() {
  if (const char* env = std::getenv("MIDAS_OUT_ROOT")) return env;
  return "runs";
}

void prepare_run_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force)
      throw std::runtime_error("output directory exists and is not empty: " +
                               dir + " (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void print_summary_line(const midas::metrics::RunResult& r) {
  std::printf(
      "[%s/%s seed=%llu] mean_q=%.3f max_q=%d dispersion=%.3f p99=%.1fms "
      "steered=%lld hits=%lld stale=%lld\n",
      r.scheduler.c_str(), r.workload_pattern.c_str(),
      static_cast<unsigned long long>(r.seed), r.mean_queue, r.max_queue,
      r.dispersion, r.latency_p99_ms, static_cast<long long>(r.steered),
      static_cast<long long>(r.cache_hits),
      static_cast<long long>(r.stale_serves));
}

int cmd_run(const std::string& config_path, const std::string& out,
            std::optional<std::uint64_t> seed, bool force) {
  auto cfg = midas::sim::load_config(config_path, seed);
  prepare_run_dir(out, force);
  auto result = midas::sim::run_experiment(cfg, out);
  print_summary_line(result);
  if (result.lyapunov_violations || result.budget_violations ||
      result.pin_violations) {
    std::fprintf(stderr, "invariant violations: lyapunov=%lld budget=%lld pin=%lld\n",
                 static_cast<long long>(result.lyapunov_violations),
                 static_cast<long long>(result.budget_violations),
                 static_cast<long long>(result.pin_violations));
    return kExitInternal;
  }
  std::printf("run written to %s\n", out.c_str());
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out,
                std::optional<std::uint64_t> seed, bool force) {
  auto cfg = midas::sim::load_config(config_path, seed);
  prepare_run_dir(out, force);

  auto rr_cfg = cfg;
  rr_cfg.scheduler = midas::sim::Scheduler::kRoundRobin;
  fs::create_directories(out + "/round_robin");
  auto rr = midas::sim::run_experiment(rr_cfg, out + "/round_robin");
  print_summary_line(rr);

  auto mid_cfg = cfg;
  mid_cfg.scheduler = midas::sim::Scheduler::kMidas;
  fs::create_directories(out + "/midas");
  auto mid = midas::sim::run_experiment(mid_cfg, out + "/midas");
  print_summary_line(mid);

  auto rep = midas::metrics::compare(rr, mid);
  std::printf("mean queue:  %.3f -> %.3f  (%.1f%% reduction)\n",
              rep.mean_queue_baseline, rep.mean_queue_midas,
              rep.mean_queue_reduction * 100.0);
  std::printf("max queue:   %d -> %d  (%.1f%% reduction)\n",
              rep.max_queue_baseline, rep.max_queue_midas,
              rep.worst_case_reduction * 100.0);
  std::printf("dispersion:  %.3f -> %.3f\n", rep.dispersion_baseline,
              rep.dispersion_midas);

  std::ofstream cmp(out + "/comparison.txt");
  cmp << "mean_queue_baseline " << rep.mean_queue_baseline << "\n"
      << "mean_queue_midas " << rep.mean_queue_midas << "\n"
      << "mean_queue_reduction " << rep.mean_queue_reduction << "\n"
      << "max_queue_baseline " << rep.max_queue_baseline << "\n"
      << "max_queue_midas " << rep.max_queue_midas << "\n"
      << "worst_case_reduction " << rep.worst_case_reduction << "\n"
      << "dispersion_baseline " << rep.dispersion_baseline << "\n"
      << "dispersion_midas " << rep.dispersion_midas << "\n";

  if (mid.lyapunov_violations || mid.budget_violations) return kExitInternal;
  return kExitOk;
}

int cmd_reproduce(const std::string& config_dir, const std::string& out,
                  bool force) {
  prepare_run_dir(out, force);
  midas::suite::ReproduceOptions opts;
  opts.config_dir = config_dir;
  opts.out_dir = out;
  auto rep = midas::suite::run_reproduction(opts);

  std::printf("%s\n", rep.table_text.c_str());
  for (const auto& c : rep.criteria)
    std::printf("[%s] %-4s %s  (%s)\n", c.pass ? "PASS" : "FAIL",
                c.id.c_str(), c.name.c_str(), c.details.c_str());

  std::ofstream report(out + "/report.txt");
  report << rep.table_text << "\n";
  for (const auto& c : rep.criteria)
    report << (c.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name
           << " (" << c.details << ")\n";

  std::printf("%s (%.1f s)\n",
              rep.all_pass ? "all criteria passed" : "criteria FAILED",
              rep.elapsed_seconds);
  return rep.all_pass ? kExitOk : kExitInternal;
}

int cmd_check_theory(double lambda, double mu, std::int64_t arrivals,
                     int trials) {
  auto rep = midas::suite::run_theory_checks(lambda, mu, arrivals, trials);
  for (const auto& c : rep.checks)
    std::printf("[%s] %s  (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.details.c_str());
  return rep.all_pass ? kExitOk : kExitInternal;
}

int cmd_validate(const std::string& config_path) {
  midas::sim::load_config(config_path, std::nullopt);
  std::printf("config ok: %s\n", config_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "midas: metadata load-balancing middleware simulator "
      "(adaptive power-of-d routing vs round-robin)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string config_dir = "configs";
  std::optional<std::uint64_t> seed;
  bool force = false;
  double lambda = 5.0, mu = 10.0;
  std::int64_t arrivals = 1000000;
  int trials = 30;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the config's seed");
  };

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config_path, "experiment config (json)")
      ->required();
  run->add_option("--out", out_dir, "run output directory");
  run->add_flag("--force", force, "overwrite an existing run directory");
  add_seed(run);

  auto* cmp = app.add_subcommand(
      "compare", "run round_robin and midas on the identical stream");
  cmp->add_option("--config", config_path, "experiment config (json)")
      ->required();
  cmp->add_option("--out", out_dir, "comparison output directory");
  cmp->add_flag("--force", force, "overwrite an existing directory");
  add_seed(cmp);

  auto* repro = app.add_subcommand(
      "reproduce", "run the committed workload suite and check every "
                   "acceptance criterion");
  repro->add_option("--configs", config_dir, "directory of committed configs");
  repro->add_option("--out", out_dir, "suite output directory");
  repro->add_flag("--force", force, "overwrite an existing directory");

  auto* theory = app.add_subcommand(
      "check-theory", "balls-into-bins and single-queue sojourn checks");
  theory->add_option("--lambda", lambda, "arrival rate (req/s)");
  theory->add_option("--mu", mu, "service rate (req/s)");
  theory->add_option("--arrivals", arrivals, "sojourn-check sample size");
  theory->add_option("--trials", trials, "balls-into-bins trials");

  auto* validate =
      app.add_subcommand("validate-config", "schema-check a config file");
  validate->add_option("--config", config_path, "experiment config (json)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (out_dir.empty()) out_dir = default_out_root() + "/run";
      return cmd_run(config_path, out_dir, seed, force);
    }
    if (cmp->parsed()) {
      if (out_dir.empty()) out_dir = default_out_root() + "/compare";
      return cmd_compare(config_path, out_dir, seed, force);
    }
    if (repro->parsed()) {
      if (out_dir.empty()) out_dir = default_out_root() + "/reproduce";
      return cmd_reproduce(config_dir, out_dir, force);
    }
    if (theory->parsed()) return cmd_check_theory(lambda, mu, arrivals, trials);
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const midas::sim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitConfig;
}

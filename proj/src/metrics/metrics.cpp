#include "midas/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "midas/core/hash.hpp"
#include "midas/sim/config.hpp"

namespace midas::metrics {

double dispersion(const std::vector<PerServerStats>& servers) {
  if (servers.empty()) throw std::invalid_argument("dispersion: no servers");
  double mean = 0.0;
  for (const auto& s : servers) mean += s.time_avg_queue;
  mean /= static_cast<double>(servers.size());
  if (mean <= 0.0) return 0.0;
  double var = 0.0;
  for (const auto& s : servers) {
    double d = s.time_avg_queue - mean;
    var += d * d;
  }
  var /= static_cast<double>(servers.size());
  return std::sqrt(var) / mean;
}

ComparisonReport compare(const RunResult& baseline, const RunResult& midas) {
  if (baseline.arrival_hash != midas.arrival_hash)
    throw std::invalid_argument(
        "compare: runs consumed different arrival streams");
  ComparisonReport rep;
  rep.mean_queue_baseline = baseline.mean_queue;
  rep.mean_queue_midas = midas.mean_queue;
  rep.max_queue_baseline = baseline.max_queue;
  rep.max_queue_midas = midas.max_queue;
  rep.dispersion_baseline = baseline.dispersion;
  rep.dispersion_midas = midas.dispersion;
  rep.mean_queue_reduction =
      baseline.mean_queue > 0.0
          ? 1.0 - midas.mean_queue / baseline.mean_queue
          : 0.0;
  rep.worst_case_reduction =
      baseline.max_queue > 0
          ? 1.0 - static_cast<double>(midas.max_queue) /
                      static_cast<double>(baseline.max_queue)
          : 0.0;
  return rep;
}

std::vector<int> balls_into_bins_max_loads(int bins, int balls, int d,
                                           int trials, Rng& rng) {
  if (bins < 1 || balls < 0 || d < 1 || trials < 1)
    throw std::invalid_argument("balls_into_bins: bad arguments");
  std::vector<int> maxima;
  maxima.reserve(static_cast<std::size_t>(trials));
  std::vector<int> load(static_cast<std::size_t>(bins));
  for (int t = 0; t < trials; ++t) {
    std::fill(load.begin(), load.end(), 0);
    for (int b = 0; b < balls; ++b) {
      std::size_t best = static_cast<std::size_t>(
          rng.uniform_below(static_cast<std::uint64_t>(bins)));
      for (int k = 1; k < d; ++k) {
        std::size_t cand = static_cast<std::size_t>(
            rng.uniform_below(static_cast<std::uint64_t>(bins)));
        if (load[cand] < load[best]) best = cand;
      }
      ++load[best];
    }
    maxima.push_back(*std::max_element(load.begin(), load.end()));
  }
  return maxima;
}

std::int64_t budget_window_violations(
    const std::vector<DecisionRecord>& records, MicroTime window_us,
    double f_max) {
  // Per-proxy sweep over every distinct sliding-window content.
  std::int64_t violations = 0;
  std::vector<int> proxies;
  for (const auto& r : records)
    if (std::find(proxies.begin(), proxies.end(), r.proxy) == proxies.end())
      proxies.push_back(r.proxy);

  for (int proxy : proxies) {
    std::vector<MicroTime> times;
    std::vector<std::int64_t> steer_prefix{0};
    for (const auto& r : records) {
      if (r.proxy != proxy || !r.eligible) continue;
      times.push_back(r.time);
      steer_prefix.push_back(steer_prefix.back() + (r.steered ? 1 : 0));
    }
    if (times.empty()) continue;

    // Window (a, a + W]: distinct contents begin at a in {t_k - W, t_k}.
    std::vector<MicroTime> starts;
    starts.reserve(times.size() * 2);
    for (MicroTime t : times) {
      starts.push_back(t - window_us);
      starts.push_back(t);
    }
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    for (MicroTime a : starts) {
      auto lo = std::upper_bound(times.begin(), times.end(), a);
      auto hi = std::upper_bound(times.begin(), times.end(), a + window_us);
      std::int64_t e = hi - lo;
      if (e <= 0) continue;
      std::int64_t s = steer_prefix[static_cast<std::size_t>(
                           hi - times.begin())] -
                       steer_prefix[static_cast<std::size_t>(
                           lo - times.begin())];
      if (static_cast<double>(s) >
          f_max * static_cast<double>(e) + 1.0 + 1e-9)
        ++violations;
    }
  }
  return violations;
}

std::int64_t lyapunov_violations(const std::vector<DecisionRecord>& records) {
  std::int64_t violations = 0;
  for (const auto& r : records) {
    if (!r.steered) continue;
    // 1e-9 guards float rounding in lhat_p - delta_l at eligibility time.
    if (control::delta_v(r.lhat_primary, r.lhat_chosen, 1) > -2.0 + 1e-9)
      ++violations;
  }
  return violations;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// Parse "<int>.<3 digits>" milliseconds into exact microseconds.
MicroTime parse_ms_to_us(const std::string& s) {
  auto dot = s.find('.');
  if (dot == std::string::npos)
    return std::strtoll(s.c_str(), nullptr, 10) * 1000;
  std::int64_t whole = std::strtoll(s.substr(0, dot).c_str(), nullptr, 10);
  std::int64_t frac = std::strtoll(s.substr(dot + 1).c_str(), nullptr, 10);
  bool neg = !s.empty() && s[0] == '-';
  std::int64_t us = std::llabs(whole) * 1000 + frac;
  return neg ? -us : us;
}

std::vector<std::string> read_data_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("recompute: cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  bool first_data = true;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    if (first_data) {  // header row
      first_data = false;
      continue;
    }
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::uint64_t file_fnv64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

RecomputedSummary recompute_from_csv(const std::string& run_dir) {
  sim::ExperimentConfig cfg = [&] {
    std::ifstream in(run_dir + "/config.json");
    if (!in) throw std::runtime_error("recompute: missing config.json");
    std::ostringstream buf;
    buf << in.rdbuf();
    return sim::parse_config_json(buf.str(), std::nullopt);
  }();

  RecomputedSummary out;
  const int m = cfg.servers;
  const MicroTime window = cfg.workload.duration_us;

  struct Integ {
    MicroTime last_t = 0;
    std::int64_t q = 0;
    std::int64_t integral = 0;
    int max_q = 0;
  };
  std::vector<Integ> integ(static_cast<std::size_t>(m));

  for (const auto& line : read_data_lines(run_dir + "/queues.csv")) {
    auto f = split_csv(line);
    MicroTime t = parse_ms_to_us(f[0]);
    int server = std::atoi(f[1].c_str());
    std::int64_t q = std::strtoll(f[2].c_str(), nullptr, 10);
    auto& it = integ[static_cast<std::size_t>(server)];
    it.integral += it.q * (t - it.last_t);
    it.last_t = t;
    it.q = q;
    it.max_q = std::max<int>(it.max_q, static_cast<int>(q));
  }

  out.servers.resize(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int s = 0; s < m; ++s) {
    auto& it = integ[static_cast<std::size_t>(s)];
    it.integral += it.q * (window - it.last_t);
    auto& ps = out.servers[static_cast<std::size_t>(s)];
    ps.queue_integral_qus = it.integral;
    ps.max_queue = it.max_q;
    ps.time_avg_queue =
        static_cast<double>(it.integral) / static_cast<double>(window);
    total += static_cast<double>(it.integral);
    out.max_queue = std::max(out.max_queue, it.max_q);
  }
  out.mean_queue =
      total / (static_cast<double>(window) * static_cast<double>(m));
  out.dispersion = dispersion(out.servers);

  out.arrivals =
      static_cast<std::int64_t>(read_data_lines(run_dir + "/arrivals.csv").size());
  out.arrival_hash = file_fnv64(run_dir + "/arrivals.csv");

  for (const auto& line : read_data_lines(run_dir + "/decisions.csv")) {
    auto f = split_csv(line);
    ++out.decisions;
    if (f[6] == "1") ++out.steered;
    if (f[7] == "1") ++out.eligible;
  }

  std::vector<MicroTime> latencies;
  for (const auto& line : read_data_lines(run_dir + "/latencies.csv")) {
    auto f = split_csv(line);
    latencies.push_back(std::strtoll(f[2].c_str(), nullptr, 10));
  }
  out.completed = static_cast<std::int64_t>(latencies.size());
  if (!latencies.empty()) {
    std::sort(latencies.begin(), latencies.end());
    auto rank = [&](double q) {
      std::size_t r = static_cast<std::size_t>(
          std::ceil(q * static_cast<double>(latencies.size())));
      if (r < 1) r = 1;
      return latencies[r - 1];
    };
    out.latency_p50_ms = us_to_ms(rank(0.5));
    out.latency_p99_ms = us_to_ms(rank(0.99));
  }
  return out;
}

}  // namespace midas::metrics

#include "midas/sim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace midas::sim {

using nlohmann::ordered_json;

const char* pattern_name(Pattern p) {
  switch (p) {
    case Pattern::kLight: return "light";
    case Pattern::kBursty: return "bursty";
    case Pattern::kPeriodic: return "periodic";
    case Pattern::kDiurnal: return "diurnal";
    case Pattern::kSkewedZipf: return "skewed_zipf";
  }
  return "?";
}

const char* scheduler_name(Scheduler s) {
  return s == Scheduler::kRoundRobin ? "round_robin" : "midas";
}

double ServiceSpec::total_capacity_per_s(int servers) const {
  double cap = 0.0;
  for (int i = 0; i < servers; ++i) {
    if (model == ServiceModel::kConstant)
      cap += 1000.0 / constant_ms_for(i);
    else
      cap += rate_for(i);
  }
  return cap;
}

namespace {

class Checker {
 public:
  Checker(const ordered_json& node, std::string path)
      : node_(node), path_(std::move(path)) {}

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!allowed.count(it.key()))
        throw ConfigError(join(it.key()), "unknown field");
    }
  }

  bool has(const char* key) const { return node_.contains(key); }

  ordered_json child(const char* key) const {
    if (!node_.contains(key) || !node_[key].is_object())
      throw ConfigError(join(key), "expected an object");
    return node_[key];
  }

  double number(const char* key, double fallback) const {
    if (!node_.contains(key)) return fallback;
    if (!node_[key].is_number())
      throw ConfigError(join(key), "expected a number");
    return node_[key].get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) const {
    if (!node_.contains(key)) return fallback;
    if (!node_[key].is_number_integer())
      throw ConfigError(join(key), "expected an integer");
    return node_[key].get<std::int64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!node_.contains(key)) return fallback;
    if (!node_[key].is_boolean())
      throw ConfigError(join(key), "expected a boolean");
    return node_[key].get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!node_.contains(key)) return fallback;
    if (!node_[key].is_string())
      throw ConfigError(join(key), "expected a string");
    return node_[key].get<std::string>();
  }

  /// Scalar-or-array field; scalar broadcasts.
  std::vector<double> numbers(const char* key,
                              std::vector<double> fallback) const {
    if (!node_.contains(key)) return fallback;
    const auto& v = node_[key];
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number())
          throw ConfigError(join(key), "expected numbers in array");
        out.push_back(e.get<double>());
      }
      if (out.empty()) throw ConfigError(join(key), "array may not be empty");
      return out;
    }
    throw ConfigError(join(key), "expected a number or array of numbers");
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const ordered_json& node_;
  std::string path_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

Pattern parse_pattern(const std::string& s, const std::string& field) {
  if (s == "light") return Pattern::kLight;
  if (s == "bursty") return Pattern::kBursty;
  if (s == "periodic") return Pattern::kPeriodic;
  if (s == "diurnal") return Pattern::kDiurnal;
  if (s == "skewed_zipf") return Pattern::kSkewedZipf;
  throw ConfigError(field,
                    "must be one of light|bursty|periodic|diurnal|skewed_zipf");
}

cache::CacheMode parse_cache_mode(const std::string& s,
                                  const std::string& field) {
  if (s == "off") return cache::CacheMode::kOff;
  if (s == "lease") return cache::CacheMode::kLease;
  if (s == "ttl") return cache::CacheMode::kTtl;
  throw ConfigError(field, "must be one of off|lease|ttl");
}

}  // namespace

void ExperimentConfig::validate() const {
  require(servers >= 1, "servers", "must be >= 1");
  require(proxies >= 1, "proxies", "must be >= 1");
  require(rtt_ms > 0, "rtt_ms", "must be > 0");

  require(workload.duration_us > 0, "workload.duration_s", "must be > 0");
  require(workload.base_rate_per_s > 0, "workload.base_rate", "must be > 0");
  require(workload.burst_amplitude >= 1, "workload.burst_amplitude",
          "must be >= 1");
  require(workload.burst_len_us > 0, "workload.burst_len_s", "must be > 0");
  require(workload.burst_gap_us >= 0, "workload.burst_gap_s",
          "must be >= 0");
  require(workload.period_us > 0, "workload.period_s", "must be > 0");
  require(workload.depth >= 0 && workload.depth < 1, "workload.depth",
          "must be in [0, 1)");
  require(workload.day_us > 0, "workload.day_s", "must be > 0");
  require(workload.trough_ratio > 0 && workload.trough_ratio <= 1,
          "workload.trough_ratio", "must be in (0, 1]");
  require(workload.zipf_s >= 0, "workload.zipf_s", "must be >= 0");
  require(workload.key_universe >= 1, "workload.key_universe",
          "must be >= 1");
  require(workload.dirs >= 1, "workload.dirs", "must be >= 1");
  require(workload.write_fraction >= 0 && workload.write_fraction <= 1,
          "workload.write_fraction", "must be in [0, 1]");

  auto positive_all = [](const std::vector<double>& v) {
    for (double x : v)
      if (!(x > 0)) return false;
    return true;
  };
  require(positive_all(service.constant_ms), "service.constant_ms",
          "must be > 0");
  require(positive_all(service.rate_per_s), "service.rate_per_s",
          "must be > 0");
  require(service.constant_ms.size() == 1 ||
              service.constant_ms.size() == static_cast<std::size_t>(servers),
          "service.constant_ms", "array length must equal servers");
  require(service.rate_per_s.size() == 1 ||
              service.rate_per_s.size() == static_cast<std::size_t>(servers),
          "service.rate_per_s", "array length must equal servers");

  require(routing.k_f >= 1, "routing.k_f", "must be >= 1");
  require(routing.vnodes_per_server >= 1, "routing.vnodes_per_server",
          "must be >= 1");
  require(routing.constrained_fraction >= 0 &&
              routing.constrained_fraction <= 1,
          "routing.constrained_fraction", "must be in [0, 1]");

  const auto& d = control.defaults;
  require(d.d0 >= 1 && d.d0 <= 4, "control.d0", "must be in {1..4}");
  require(d.delta_l_min >= 0, "control.delta_l_min", "must be >= 0");
  require(d.delta_l_max >= d.delta_l_min, "control.delta_l_max",
          "must be >= delta_l_min");
  require(d.delta_l0 >= d.delta_l_min && d.delta_l0 <= d.delta_l_max,
          "control.delta_l0", "must be within [delta_l_min, delta_l_max]");
  require(d.t_fast_us > 0, "control.t_fast_ms", "must be > 0");
  require(d.t_slow_us > 0, "control.t_slow_ms", "must be > 0");
  require(d.pin_duration_us >= d.t_fast_us, "control.pin_ms",
          "must be >= t_fast_ms");
  require(d.pin_duration_us >= ms_to_us(rtt_ms), "control.pin_ms",
          "must be >= rtt_ms");
  require(d.f_cap >= 0 && d.f_cap <= 1, "control.f_cap",
          "must be in [0, 1]");
  require(d.f_max0 >= 0 && d.f_max0 <= d.f_cap, "control.f_max0",
          "must be in [0, f_cap]");
  require(d.h_down < d.h_up, "control.h_down", "must be < h_up");
  require(d.k_up >= 1, "control.k_up", "must be >= 1");
  require(d.k_down >= 1, "control.k_down", "must be >= 1");
  require(d.w1 > 0, "control.w1", "must be > 0");
  require(d.w2 > 0, "control.w2", "must be > 0");
  require(d.eps > 0, "control.epsilon", "must be > 0");
  require(d.reroute_window_us > 0, "control.window_ms", "must be > 0");
  require(d.alpha_fast > 0 && d.alpha_fast <= 1, "control.alpha_fast",
          "must be in (0, 1]");
  require(d.alpha_slow > 0 && d.alpha_slow <= 1, "control.alpha_slow",
          "must be in (0, 1]");
  require(d.p_star > 0 && d.p_star < 1, "control.p_star",
          "must be in (0, 1)");
  require(d.gamma > 0 && d.gamma < 1, "control.gamma", "must be in (0, 1)");
  require(control.warmup_utilization > 0 && control.warmup_utilization <= 1,
          "control.warmup_utilization", "must be in (0, 1]");
  if (scheduler == Scheduler::kMidas)
    require(control.warmup_us >= kMicrosPerSecond, "control.warmup_s",
            "must be >= 1 for the midas scheduler (targets need a warmup)");

  require(cache.capacity >= 1, "cache.capacity", "must be >= 1");
  require(cache.lease_ms > 0, "cache.lease_ms", "must be > 0");
  require(cache.ttl_max_ms > 0, "cache.ttl_max_ms", "must be > 0");
  require(cache.p_star > 0 && cache.p_star < 1, "cache.p_star",
          "must be in (0, 1)");
  require(cache.gamma > 0 && cache.gamma < 1, "cache.gamma",
          "must be in (0, 1)");
  require(cache.w_high >= 0 && cache.w_high <= 1, "cache.w_high",
          "must be in [0, 1]");
  require(cache.class_prefix_depth >= 1, "cache.class_prefix_depth",
          "must be >= 1");
  require(cache.proxy_service_ms >= 0, "cache.proxy_service_ms",
          "must be >= 0");
  if (cache.ttl_min_ms)
    require(*cache.ttl_min_ms > 0, "cache.ttl_min_ms", "must be > 0");
}

ExperimentConfig parse_config_json(const std::string& text,
                                   std::optional<std::uint64_t> seed_override) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("(root)", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("(root)", "expected an object");

  ExperimentConfig cfg;
  Checker top(root, "");
  top.allow_only({"seed", "servers", "proxies", "rtt_ms", "scheduler",
                  "workload", "service", "routing", "control", "cache",
                  "queue_trace", "keep_traces"});

  cfg.seed = static_cast<std::uint64_t>(
      top.integer("seed", static_cast<std::int64_t>(cfg.seed)));
  cfg.servers = static_cast<int>(top.integer("servers", cfg.servers));
  cfg.proxies = static_cast<int>(top.integer("proxies", cfg.proxies));
  cfg.rtt_ms = top.number("rtt_ms", cfg.rtt_ms);

  std::string sched = top.text("scheduler", "midas");
  if (sched == "round_robin") cfg.scheduler = Scheduler::kRoundRobin;
  else if (sched == "midas") cfg.scheduler = Scheduler::kMidas;
  else throw ConfigError("scheduler", "must be round_robin|midas");

  std::string trace = top.text("queue_trace", "dense");
  if (trace == "dense") cfg.queue_trace = QueueTraceMode::kDense;
  else if (trace == "ticks") cfg.queue_trace = QueueTraceMode::kTicks;
  else throw ConfigError("queue_trace", "must be dense|ticks");
  cfg.keep_traces = top.boolean("keep_traces", cfg.keep_traces);

  if (top.has("workload")) {
    Checker w(root["workload"], "workload");
    w.allow_only({"pattern", "duration_s", "base_rate", "burst_amplitude",
                  "burst_len_s", "burst_gap_s", "period_s", "depth", "day_s",
                  "trough_ratio", "zipf_s", "key_universe", "dirs",
                  "write_fraction"});
    cfg.workload.pattern =
        parse_pattern(w.text("pattern", "light"), "workload.pattern");
    cfg.workload.duration_us = seconds_to_us(
        w.number("duration_s", us_to_ms(cfg.workload.duration_us) / 1000.0));
    cfg.workload.base_rate_per_s =
        w.number("base_rate", cfg.workload.base_rate_per_s);
    cfg.workload.burst_amplitude =
        w.number("burst_amplitude", cfg.workload.burst_amplitude);
    cfg.workload.burst_len_us = seconds_to_us(w.number("burst_len_s", 3.0));
    cfg.workload.burst_gap_us = seconds_to_us(w.number("burst_gap_s", 27.0));
    cfg.workload.period_us = seconds_to_us(w.number("period_s", 60.0));
    cfg.workload.depth = w.number("depth", cfg.workload.depth);
    cfg.workload.day_us = seconds_to_us(w.number("day_s", 240.0));
    cfg.workload.trough_ratio =
        w.number("trough_ratio", cfg.workload.trough_ratio);
    cfg.workload.zipf_s = w.number("zipf_s", cfg.workload.zipf_s);
    cfg.workload.key_universe =
        w.integer("key_universe", cfg.workload.key_universe);
    cfg.workload.dirs = static_cast<int>(w.integer("dirs", cfg.workload.dirs));
    cfg.workload.write_fraction =
        w.number("write_fraction", cfg.workload.write_fraction);
  }

  if (top.has("service")) {
    Checker s(root["service"], "service");
    s.allow_only({"model", "constant_ms", "rate_per_s"});
    std::string model = s.text("model", "constant");
    if (model == "constant") cfg.service.model = ServiceModel::kConstant;
    else if (model == "exponential")
      cfg.service.model = ServiceModel::kExponential;
    else throw ConfigError("service.model", "must be constant|exponential");
    cfg.service.constant_ms =
        s.numbers("constant_ms", cfg.service.constant_ms);
    cfg.service.rate_per_s = s.numbers("rate_per_s", cfg.service.rate_per_s);
  }

  if (top.has("routing")) {
    Checker r(root["routing"], "routing");
    r.allow_only({"k_f", "vnodes_per_server", "constrained_fraction"});
    cfg.routing.k_f = static_cast<int>(r.integer("k_f", cfg.routing.k_f));
    cfg.routing.vnodes_per_server = static_cast<int>(
        r.integer("vnodes_per_server", cfg.routing.vnodes_per_server));
    cfg.routing.constrained_fraction =
        r.number("constrained_fraction", cfg.routing.constrained_fraction);
  }

  if (top.has("control")) {
    Checker c(root["control"], "control");
    c.allow_only({"t_fast_ms", "t_slow_ms", "d0", "delta_l0", "delta_l_min",
                  "delta_l_max", "pin_ms", "f_cap", "f_max0", "h_down",
                  "h_up", "k_up", "k_down", "w1", "w2", "epsilon",
                  "window_ms", "alpha_fast", "alpha_slow", "p_star", "gamma",
                  "jitter_frac", "adapt_f_max", "warmup_s",
                  "warmup_utilization"});
    auto& d = cfg.control.defaults;
    d.t_fast_us = ms_to_us(c.number("t_fast_ms", 250.0));
    d.t_slow_us = ms_to_us(c.number("t_slow_ms", 30000.0));
    d.d0 = static_cast<int>(c.integer("d0", d.d0));
    if (d.d0 < 1 || d.d0 > 4)
      throw ConfigError("control.d0", "must be in {1..4}");
    d.delta_l0 = static_cast<int>(c.integer("delta_l0", d.delta_l0));
    d.delta_l_min = static_cast<int>(c.integer("delta_l_min", d.delta_l_min));
    d.delta_l_max = static_cast<int>(c.integer("delta_l_max", d.delta_l_max));
    d.pin_duration_us = ms_to_us(c.number("pin_ms", 300.0));
    d.f_cap = c.number("f_cap", d.f_cap);
    d.f_max0 = c.number("f_max0", std::min(d.f_max0, d.f_cap));
    d.h_down = c.number("h_down", d.h_down);
    d.h_up = c.number("h_up", d.h_up);
    d.k_up = static_cast<int>(c.integer("k_up", d.k_up));
    d.k_down = static_cast<int>(c.integer("k_down", d.k_down));
    d.w1 = c.number("w1", d.w1);
    d.w2 = c.number("w2", d.w2);
    d.eps = c.number("epsilon", d.eps);
    d.reroute_window_us = ms_to_us(c.number("window_ms", 1000.0));
    d.alpha_fast = c.number("alpha_fast", d.alpha_fast);
    d.alpha_slow = c.number("alpha_slow", d.alpha_slow);
    d.p_star = c.number("p_star", d.p_star);
    d.gamma = c.number("gamma", d.gamma);
    d.jitter_frac = c.number("jitter_frac", d.jitter_frac);
    d.adapt_f_max = c.boolean("adapt_f_max", d.adapt_f_max);
    cfg.control.warmup_us = seconds_to_us(c.number("warmup_s", 60.0));
    cfg.control.warmup_utilization =
        c.number("warmup_utilization", cfg.control.warmup_utilization);
  }

  if (top.has("cache")) {
    Checker k(root["cache"], "cache");
    k.allow_only({"mode", "capacity", "lease_ms", "ttl_max_ms", "ttl_min_ms",
                  "p_star", "gamma", "w_high", "class_prefix_depth",
                  "proxy_service_ms"});
    cfg.cache.mode = parse_cache_mode(k.text("mode", "off"), "cache.mode");
    cfg.cache.capacity = static_cast<std::size_t>(
        k.integer("capacity", static_cast<std::int64_t>(cfg.cache.capacity)));
    cfg.cache.lease_ms = k.number("lease_ms", cfg.cache.lease_ms);
    cfg.cache.ttl_max_ms = k.number("ttl_max_ms", cfg.cache.ttl_max_ms);
    if (k.has("ttl_min_ms"))
      cfg.cache.ttl_min_ms = k.number("ttl_min_ms", 0.0);
    cfg.cache.p_star = k.number("p_star", cfg.cache.p_star);
    cfg.cache.gamma = k.number("gamma", cfg.cache.gamma);
    cfg.cache.w_high = k.number("w_high", cfg.cache.w_high);
    cfg.cache.class_prefix_depth = static_cast<int>(
        k.integer("class_prefix_depth", cfg.cache.class_prefix_depth));
    cfg.cache.proxy_service_ms =
        k.number("proxy_service_ms", cfg.cache.proxy_service_ms);
  }

  if (seed_override) cfg.seed = *seed_override;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot read config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str(), seed_override);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["servers"] = cfg.servers;
  j["proxies"] = cfg.proxies;
  j["rtt_ms"] = cfg.rtt_ms;
  j["scheduler"] = scheduler_name(cfg.scheduler);
  j["queue_trace"] =
      cfg.queue_trace == QueueTraceMode::kDense ? "dense" : "ticks";

  ordered_json w;
  w["pattern"] = pattern_name(cfg.workload.pattern);
  w["duration_s"] = us_to_ms(cfg.workload.duration_us) / 1000.0;
  w["base_rate"] = cfg.workload.base_rate_per_s;
  w["burst_amplitude"] = cfg.workload.burst_amplitude;
  w["burst_len_s"] = us_to_ms(cfg.workload.burst_len_us) / 1000.0;
  w["burst_gap_s"] = us_to_ms(cfg.workload.burst_gap_us) / 1000.0;
  w["period_s"] = us_to_ms(cfg.workload.period_us) / 1000.0;
  w["depth"] = cfg.workload.depth;
  w["day_s"] = us_to_ms(cfg.workload.day_us) / 1000.0;
  w["trough_ratio"] = cfg.workload.trough_ratio;
  w["zipf_s"] = cfg.workload.zipf_s;
  w["key_universe"] = cfg.workload.key_universe;
  w["dirs"] = cfg.workload.dirs;
  w["write_fraction"] = cfg.workload.write_fraction;
  j["workload"] = w;

  ordered_json s;
  s["model"] = cfg.service.model == ServiceModel::kConstant ? "constant"
                                                            : "exponential";
  s["constant_ms"] = cfg.service.constant_ms;
  s["rate_per_s"] = cfg.service.rate_per_s;
  j["service"] = s;

  ordered_json r;
  r["k_f"] = cfg.routing.k_f;
  r["vnodes_per_server"] = cfg.routing.vnodes_per_server;
  r["constrained_fraction"] = cfg.routing.constrained_fraction;
  j["routing"] = r;

  const auto& d = cfg.control.defaults;
  ordered_json c;
  c["t_fast_ms"] = us_to_ms(d.t_fast_us);
  c["t_slow_ms"] = us_to_ms(d.t_slow_us);
  c["d0"] = d.d0;
  c["delta_l0"] = d.delta_l0;
  c["delta_l_min"] = d.delta_l_min;
  c["delta_l_max"] = d.delta_l_max;
  c["pin_ms"] = us_to_ms(d.pin_duration_us);
  c["f_cap"] = d.f_cap;
  c["f_max0"] = d.f_max0;
  c["h_down"] = d.h_down;
  c["h_up"] = d.h_up;
  c["k_up"] = d.k_up;
  c["k_down"] = d.k_down;
  c["w1"] = d.w1;
  c["w2"] = d.w2;
  c["epsilon"] = d.eps;
  c["window_ms"] = us_to_ms(d.reroute_window_us);
  c["alpha_fast"] = d.alpha_fast;
  c["alpha_slow"] = d.alpha_slow;
  c["p_star"] = d.p_star;
  c["gamma"] = d.gamma;
  c["jitter_frac"] = d.jitter_frac;
  c["adapt_f_max"] = d.adapt_f_max;
  c["warmup_s"] = us_to_ms(cfg.control.warmup_us) / 1000.0;
  c["warmup_utilization"] = cfg.control.warmup_utilization;
  j["control"] = c;

  ordered_json k;
  switch (cfg.cache.mode) {
    case cache::CacheMode::kOff: k["mode"] = "off"; break;
    case cache::CacheMode::kLease: k["mode"] = "lease"; break;
    case cache::CacheMode::kTtl: k["mode"] = "ttl"; break;
  }
  k["capacity"] = cfg.cache.capacity;
  k["lease_ms"] = cfg.cache.lease_ms;
  k["ttl_max_ms"] = cfg.cache.ttl_max_ms;
  if (cfg.cache.ttl_min_ms) k["ttl_min_ms"] = *cfg.cache.ttl_min_ms;
  k["p_star"] = cfg.cache.p_star;
  k["gamma"] = cfg.cache.gamma;
  k["w_high"] = cfg.cache.w_high;
  k["class_prefix_depth"] = cfg.cache.class_prefix_depth;
  k["proxy_service_ms"] = cfg.cache.proxy_service_ms;
  j["cache"] = k;

  return j.dump(2) + "\n";
}

}  // namespace midas::sim

#include "midas/sim/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <memory>
#include <optional>
#include <queue>
#include <unordered_map>

#include "json.hpp"

#include "midas/cache/cache.hpp"
#include "midas/control/control.hpp"
#include "midas/core/hash.hpp"
#include "midas/core/rng.hpp"
#include "midas/routing/ring.hpp"
#include "midas/routing/router.hpp"
#include "midas/sim/workload.hpp"
#include "midas/telemetry/telemetry.hpp"

namespace midas::sim {

namespace {

using metrics::DecisionRecord;
using metrics::RunResult;

constexpr std::int64_t kWarmupIdBase = std::int64_t{1} << 40;

enum class EvKind : std::uint8_t {
  kArrival,
  kServerArrive,
  kServiceComplete,
  kInvalidation,
  kFastTick,
  kSlowTick,
  kWarmupEnd,
  kRunEnd,
};

struct Ev {
  MicroTime t = 0;
  std::int64_t seq = 0;
  EvKind kind = EvKind::kArrival;
  int server = 0;
  std::int64_t req = -1;
  std::string path;  // invalidation payload
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

class LineHasher {
 public:
  void add(std::string_view line) {
    for (unsigned char c : line) {
      h_ ^= c;
      h_ *= 1099511628211ULL;
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

/// CSV sink: optional file plus a running hash over every emitted byte.
class CsvSink {
 public:
  void open(const std::string& dir, const std::string& name,
            const std::string& header) {
    if (!dir.empty()) {
      file_.open(dir + "/" + name);
      if (!file_) throw std::runtime_error("cannot open " + dir + "/" + name);
    }
    write("# midas-csv v1 " + name + "\n");
    write(header + "\n");
  }

  void write(std::string_view line) {
    hash_.add(line);
    if (file_.is_open()) file_ << line;
  }

  std::uint64_t hash() const { return hash_.value(); }

 private:
  std::ofstream file_;
  LineHasher hash_;
};

std::string fmt_ms(MicroTime us) {
  char buf[48];
  const char* sign = "";
  std::int64_t a = us;
  if (a < 0) {
    sign = "-";
    a = -a;
  }
  std::snprintf(buf, sizeof(buf), "%s%" PRId64 ".%03" PRId64, sign, a / 1000,
                a % 1000);
  return buf;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

/// Exact integral of a per-server queue step function, request-microseconds.
struct QueueIntegrator {
  MicroTime last_t = 0;
  int q = 0;
  std::int64_t integral = 0;
  int max_q = 0;

  void reset(MicroTime start) {
    last_t = start;
    integral = 0;
    max_q = q;
  }

  void change(MicroTime now, int delta) {
    integral += static_cast<std::int64_t>(q) * (now - last_t);
    last_t = now;
    q += delta;
    max_q = std::max(max_q, q);
  }

  void close(MicroTime end) {
    integral += static_cast<std::int64_t>(q) * (end - last_t);
    last_t = end;
  }
};

struct ServerState {
  std::deque<std::int64_t> queue;  // request ids; front is in service
  QueueIntegrator integ;
  std::int64_t arrivals = 0;
  std::int64_t completions = 0;
};

struct Pending {
  Request req;
  int proxy = 0;
  int server = 0;
  MicroTime enqueued = 0;
};

struct Proxy {
  cache::ProxyCache cache;
  std::unique_ptr<routing::Router> router;
  std::unique_ptr<control::Controller> controller;
  Rng jitter_rng{0};
  Rng routing_rng{0};
};

class Experiment {
 public:
  Experiment(const ExperimentConfig& cfg, const std::string& out_dir)
      : cfg_(cfg), out_dir_(out_dir), root_rng_(cfg.seed) {}

  RunResult run();

 private:
  void setup();
  void open_sinks();
  void schedule(MicroTime t, EvKind kind, int server = 0,
                std::int64_t req = -1, std::string path = {});
  void pull_next_arrival();
  MicroTime rel(MicroTime t) const { return t - main_offset_; }

  void on_arrival(const Ev& ev);
  void on_server_arrive(const Ev& ev);
  void on_service_complete(const Ev& ev);
  void on_invalidation(const Ev& ev);
  void on_fast_tick(const Ev& ev);
  void on_slow_tick(const Ev& ev);
  void on_warmup_end(const Ev& ev);

  MicroTime service_time(int server);
  void route_to_server(const Request& req, int proxy, int server,
                       MicroTime now);
  void record_decision(const routing::RoutingDecision& dec, int proxy);
  void complete_request(const Request& req, MicroTime response_time,
                        MicroTime latency_us, int server,
                        MicroTime sojourn_us);
  std::optional<ServerId> constraint_for(const Request& req) const;
  void queue_row(MicroTime now, int server);
  void finalize(RunResult& result);

  ExperimentConfig cfg_;
  std::string out_dir_;
  Rng root_rng_;

  SimClock clock_;
  std::priority_queue<Ev, std::vector<Ev>, EvLater> events_;
  std::int64_t next_seq_ = 0;

  std::unique_ptr<WorkloadStream> warmup_stream_;
  std::unique_ptr<WorkloadStream> main_stream_;
  std::optional<Request> staged_arrival_;
  MicroTime main_offset_ = 0;
  MicroTime main_end_abs_ = 0;
  bool main_started_ = false;
  bool cache_enabled_ = false;

  std::vector<ServerState> servers_;
  std::vector<telemetry::ServerStats> stats_;
  telemetry::TelemetrySnapshot snapshot_;
  routing::HashRing ring_;
  std::vector<Proxy> proxies_;
  std::unique_ptr<routing::RoundRobin> round_robin_;
  Rng service_rng_{0};
  Rng gossip_rng_{0};

  std::unordered_map<std::int64_t, Pending> inflight_;
  std::unordered_map<std::string, std::uint64_t> versions_;

  std::vector<double> warmup_b_samples_;
  std::vector<double> warmup_latencies_ms_;
  std::vector<double> warmup_transport_ms_;

  control::ControlTargets targets_;
  bool targets_ready_ = false;
  double max_pressure_ = 0.0;
  MicroTime last_tick_above_h_up_ = -1;
  std::int64_t arrival_count_ = 0;  // proxy round-robin cursor

  std::int64_t arrivals_main_ = 0;
  std::int64_t completed_main_ = 0;
  std::vector<MicroTime> latencies_us_;
  std::int64_t sojourn_count_ = 0;
  std::int64_t sojourn_sum_us_ = 0;
  std::int64_t decisions_ = 0;
  std::int64_t steered_ = 0;
  std::int64_t eligible_ = 0;
  std::int64_t stale_serves_ = 0;
  std::vector<DecisionRecord> decision_log_;  // eligible decisions only
  std::unordered_map<std::uint64_t, MicroTime> last_steer_;
  std::int64_t pin_violations_ = 0;
  std::vector<std::pair<MicroTime, double>> pressure_trace_;

  CsvSink arrivals_csv_;
  CsvSink queues_csv_;
  CsvSink telemetry_csv_;
  CsvSink decisions_csv_;
  CsvSink control_csv_;
  CsvSink cache_csv_;
  CsvSink latencies_csv_;

  bool done_ = false;
};

void Experiment::open_sinks() {
  arrivals_csv_.open(out_dir_, "arrivals.csv", "t_ms,req_id,path,op,is_write");
  queues_csv_.open(out_dir_, "queues.csv", "t_ms,server,qlen");
  telemetry_csv_.open(out_dir_, "telemetry.csv",
                      "t_ms,server,raw_queue,lhat,p50_ms,p99_ms");
  decisions_csv_.open(out_dir_, "decisions.csv",
                      "t_ms,req_id,shard,proxy,primary,chosen,steered,"
                      "eligible,pin_applied,pin_followed,d,delta_l,"
                      "delta_t_ms,lhat_primary,lhat_chosen,snapshot_ms");
  control_csv_.open(out_dir_, "control.csv",
                    "t_ms,b,p99_ms,pressure,d,delta_l,delta_t_ms,f_max,"
                    "window_eligible,window_steered,escalations,"
                    "deescalations");
  cache_csv_.open(out_dir_, "cache.csv",
                  "t_ms,proxy,class,hazard_per_ms,write_fraction,ttl_ms,"
                  "hit_ratio,stale_serves");
  latencies_csv_.open(out_dir_, "latencies.csv",
                      "t_ms,req_id,latency_us,server,sojourn_us");
}

void Experiment::schedule(MicroTime t, EvKind kind, int server,
                          std::int64_t req, std::string path) {
  if (t < clock_.now()) throw std::logic_error("event scheduled in the past");
  Ev ev;
  ev.t = t;
  ev.seq = next_seq_++;
  ev.kind = kind;
  ev.server = server;
  ev.req = req;
  ev.path = std::move(path);
  events_.push(std::move(ev));
}

MicroTime Experiment::service_time(int server) {
  if (cfg_.service.model == ServiceModel::kConstant)
    return ms_to_us(cfg_.service.constant_ms_for(server));
  double mean_s = 1.0 / cfg_.service.rate_for(server);
  MicroTime t = seconds_to_us(service_rng_.exponential(mean_s));
  return std::max<MicroTime>(t, 1);
}

std::optional<ServerId> Experiment::constraint_for(const Request& req) const {
  if (cfg_.routing.constrained_fraction <= 0.0) return std::nullopt;
  // Deterministic per-key draw, independent of every RNG stream.
  std::uint64_t h = mix64(req.key.shard ^ 0xC0457A1D5EEDULL);
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < cfg_.routing.constrained_fraction)
    return ring_.lookup(req.key.shard);
  return std::nullopt;
}

void Experiment::pull_next_arrival() {
  if (staged_arrival_) return;
  if (!main_started_ && warmup_stream_) {
    if (auto req = warmup_stream_->next()) {
      staged_arrival_ = *req;  // warmup times are absolute already
      schedule(req->arrival, EvKind::kArrival, 0, req->id);
      return;
    }
    warmup_stream_.reset();
    return;  // main stream begins at the warmup-end event
  }
  if (main_started_ && main_stream_) {
    if (auto req = main_stream_->next()) {
      Request r = *req;
      r.arrival += main_offset_;
      staged_arrival_ = r;
      schedule(r.arrival, EvKind::kArrival, 0, r.id);
      return;
    }
    main_stream_.reset();
  }
}

void Experiment::setup() {
  open_sinks();

  ring_ = routing::HashRing::build(cfg_.servers,
                                   cfg_.routing.vnodes_per_server, cfg_.seed);
  servers_.resize(static_cast<std::size_t>(cfg_.servers));
  stats_.resize(static_cast<std::size_t>(cfg_.servers));
  service_rng_ = root_rng_.substream("service");
  gossip_rng_ = root_rng_.substream("gossip");

  const bool midas = cfg_.scheduler == Scheduler::kMidas;
  cache::CacheParams cache_params;
  cache_params.mode = midas ? cfg_.cache.mode : cache::CacheMode::kOff;
  cache_params.capacity = cfg_.cache.capacity;
  cache_params.ttl_min_us = cfg_.cache.ttl_min_ms
                                ? ms_to_us(*cfg_.cache.ttl_min_ms)
                                : ms_to_us(cfg_.rtt_ms);
  cache_params.ttl_max_us = ms_to_us(cfg_.cache.ttl_max_ms);
  cache_params.lease_us = ms_to_us(cfg_.cache.lease_ms);
  cache_params.p_star = cfg_.cache.p_star;
  cache_params.gamma = cfg_.cache.gamma;
  cache_params.w_high = cfg_.cache.w_high;
  cache_params.alpha_slow = cfg_.control.defaults.alpha_slow;
  cache_params.class_prefix_depth = cfg_.cache.class_prefix_depth;

  proxies_.resize(static_cast<std::size_t>(cfg_.proxies));
  for (int p = 0; p < cfg_.proxies; ++p) {
    auto& px = proxies_[static_cast<std::size_t>(p)];
    px.cache = cache::ProxyCache(cache_params);
    px.router = std::make_unique<routing::Router>(
        &ring_, cfg_.routing.k_f, cfg_.control.defaults.pin_duration_us,
        cfg_.control.defaults.reroute_window_us);
    px.controller = std::make_unique<control::Controller>(
        cfg_.control.defaults, cfg_.rtt_ms);
    std::string suffix = "/p" + std::to_string(p);
    px.jitter_rng = root_rng_.substream("jitter" + suffix);
    px.routing_rng = root_rng_.substream("routing" + suffix);
  }

  if (!midas) round_robin_ = std::make_unique<routing::RoundRobin>(cfg_.servers);

  // Arrival streams. The main stream is generated relative to the phase
  // start so both schedulers consume byte-identical request sequences.
  main_stream_ = std::make_unique<WorkloadStream>(
      cfg_.workload, root_rng_.substream("workload.main"), 0);
  if (midas) {
    main_offset_ = cfg_.control.warmup_us;
    WorkloadSpec warm;
    warm.pattern = Pattern::kLight;
    warm.duration_us = cfg_.control.warmup_us;
    warm.base_rate_per_s = cfg_.control.warmup_utilization *
                           cfg_.service.total_capacity_per_s(cfg_.servers);
    warm.zipf_s = 0.0;
    warm.key_universe = cfg_.workload.key_universe;
    warm.dirs = cfg_.workload.dirs;
    warm.write_fraction = cfg_.workload.write_fraction;
    warmup_stream_ = std::make_unique<WorkloadStream>(
        warm, root_rng_.substream("workload.warmup"), kWarmupIdBase);
    schedule(cfg_.control.warmup_us, EvKind::kWarmupEnd);
  } else {
    main_started_ = true;
    cache_enabled_ = false;
    for (int s = 0; s < cfg_.servers; ++s) queue_row(0, s);
  }
  main_end_abs_ = main_offset_ + cfg_.workload.duration_us;

  schedule(main_end_abs_, EvKind::kRunEnd);
  schedule(0, EvKind::kFastTick);
  if (midas && cfg_.cache.mode != cache::CacheMode::kOff)
    schedule(main_offset_ + cfg_.control.defaults.t_slow_us, EvKind::kSlowTick);

  pull_next_arrival();
}

void Experiment::queue_row(MicroTime now, int server) {
  if (!main_started_) return;
  if (cfg_.queue_trace != QueueTraceMode::kDense) return;
  queues_csv_.write(fmt_ms(rel(now)) + "," + std::to_string(server) + "," +
                    std::to_string(servers_[static_cast<std::size_t>(server)]
                                       .queue.size()) +
                    "\n");
}

void Experiment::route_to_server(const Request& req, int proxy, int server,
                                 MicroTime now) {
  Pending p;
  p.req = req;
  p.proxy = proxy;
  p.server = server;
  inflight_.emplace(req.id, std::move(p));
  MicroTime half_rtt = ms_to_us(cfg_.rtt_ms) / 2;
  schedule(now + half_rtt, EvKind::kServerArrive, server, req.id);
}

void Experiment::record_decision(const routing::RoutingDecision& dec,
                                 int proxy) {
  ++decisions_;
  if (dec.eligible) ++eligible_;
  if (dec.steered) ++steered_;

  if (dec.eligible) {
    DecisionRecord rec;
    rec.time = dec.time;
    rec.proxy = proxy;
    rec.eligible = true;
    rec.steered = dec.steered;
    rec.lhat_primary = dec.lhat_primary;
    rec.lhat_chosen = dec.lhat_chosen;
    rec.delta_l = dec.delta_l;
    rec.shard = dec.shard;
    decision_log_.push_back(rec);
  }
  if (dec.steered) {
    auto it = last_steer_.find(dec.shard);
    if (it != last_steer_.end() &&
        dec.time - it->second < cfg_.control.defaults.pin_duration_us)
      ++pin_violations_;
    last_steer_[dec.shard] = dec.time;
  }

  char shard_hex[24];
  std::snprintf(shard_hex, sizeof(shard_hex), "%016" PRIx64, dec.shard);
  std::string row;
  row.reserve(192);
  row += fmt_ms(rel(dec.time));
  row += ',';
  row += std::to_string(dec.request_id);
  row += ',';
  row += shard_hex;
  row += ',';
  row += std::to_string(proxy);
  row += ',';
  row += std::to_string(dec.primary.index);
  row += ',';
  row += std::to_string(dec.chosen.index);
  row += ',';
  row += dec.steered ? '1' : '0';
  row += ',';
  row += dec.eligible ? '1' : '0';
  row += ',';
  row += dec.pin_applied ? '1' : '0';
  row += ',';
  row += dec.pin_followed ? '1' : '0';
  row += ',';
  row += std::to_string(dec.d);
  row += ',';
  row += std::to_string(dec.delta_l);
  row += ',';
  row += fmt_ms(dec.delta_t_us);
  row += ',';
  row += fmt_g17(dec.lhat_primary);
  row += ',';
  row += fmt_g17(dec.lhat_chosen);
  row += ',';
  row += fmt_ms(rel(dec.snapshot_time));
  row += '\n';
  decisions_csv_.write(row);
}

void Experiment::complete_request(const Request& req,
                                  MicroTime response_time,
                                  MicroTime latency_us, int server,
                                  MicroTime sojourn_us) {
  bool main_req = req.id < kWarmupIdBase;
  if (!main_started_ || !main_req) {
    if (!main_req) {
      warmup_latencies_ms_.push_back(us_to_ms(latency_us));
      warmup_transport_ms_.push_back(us_to_ms(latency_us - sojourn_us));
    }
    return;
  }
  ++completed_main_;
  latencies_us_.push_back(latency_us);
  if (server >= 0) {
    ++sojourn_count_;
    sojourn_sum_us_ += sojourn_us;
  }
  std::string row;
  row.reserve(96);
  row += fmt_ms(rel(response_time));
  row += ',';
  row += std::to_string(req.id);
  row += ',';
  row += std::to_string(latency_us);
  row += ',';
  row += std::to_string(server);
  row += ',';
  row += std::to_string(sojourn_us);
  row += '\n';
  latencies_csv_.write(row);
}

void Experiment::on_arrival(const Ev& ev) {
  Request req = *staged_arrival_;
  staged_arrival_.reset();
  pull_next_arrival();

  MicroTime now = ev.t;
  int proxy = static_cast<int>(arrival_count_ % cfg_.proxies);
  ++arrival_count_;

  bool main_req = req.id < kWarmupIdBase;
  if (main_req) {
    ++arrivals_main_;
    std::string row;
    row.reserve(96);
    row += fmt_ms(rel(now));
    row += ',';
    row += std::to_string(req.id);
    row += ',';
    row += req.key.path;
    row += ',';
    row += op_kind_name(req.op);
    row += ',';
    row += req.is_write ? '1' : '0';
    row += '\n';
    arrivals_csv_.write(row);
  }

  if (cfg_.scheduler == Scheduler::kRoundRobin) {
    route_to_server(req, proxy, round_robin_->next().index, now);
    return;
  }

  auto& px = proxies_[static_cast<std::size_t>(proxy)];

  // Warmup: pure consistent hashing, no caching, no steering.
  if (!main_started_) {
    auto dec = px.router->route_primary(req, now);
    route_to_server(req, proxy, dec.chosen.index, now);
    return;
  }

  MicroTime half_rtt = ms_to_us(cfg_.rtt_ms) / 2;
  if (cache_enabled_ && op_is_cacheable(req.op)) {
    auto hit = px.cache.lookup(req.key.path, req.op, now);
    px.cache.note_read(req.key.path, req.op, now, hit.has_value());
    if (hit) {
      auto vit = versions_.find(req.key.path);
      std::uint64_t current = vit == versions_.end() ? 0 : vit->second;
      if (*hit != current) {
        px.cache.note_stale_serve(req.key.path, req.op);
        ++stale_serves_;
      }
      MicroTime latency =
          ms_to_us(cfg_.cache.proxy_service_ms) + half_rtt;
      complete_request(req, now + latency, latency, -1, 0);
      return;
    }
  }

  auto dec = px.router->route(req, snapshot_, px.controller->knobs(),
                              constraint_for(req), now, px.routing_rng);
  record_decision(dec, proxy);
  route_to_server(req, proxy, dec.chosen.index, now);
}

void Experiment::on_server_arrive(const Ev& ev) {
  auto it = inflight_.find(ev.req);
  if (it == inflight_.end()) throw std::logic_error("unknown request arrived");
  Pending& p = it->second;
  p.enqueued = ev.t;
  auto& srv = servers_[static_cast<std::size_t>(ev.server)];
  srv.integ.change(ev.t, +1);
  ++srv.arrivals;
  srv.queue.push_back(ev.req);
  queue_row(ev.t, ev.server);
  if (srv.queue.size() == 1)
    schedule(ev.t + service_time(ev.server), EvKind::kServiceComplete,
             ev.server);
}

void Experiment::on_service_complete(const Ev& ev) {
  auto& srv = servers_[static_cast<std::size_t>(ev.server)];
  if (srv.queue.empty()) throw std::logic_error("completion on empty queue");
  std::int64_t id = srv.queue.front();
  srv.queue.pop_front();
  srv.integ.change(ev.t, -1);
  ++srv.completions;
  queue_row(ev.t, ev.server);

  auto it = inflight_.find(id);
  if (it == inflight_.end()) throw std::logic_error("completion for unknown request");
  Pending pending = std::move(it->second);
  inflight_.erase(it);

  MicroTime half_rtt = ms_to_us(cfg_.rtt_ms) / 2;
  MicroTime sojourn = ev.t - pending.enqueued;
  MicroTime latency = (ev.t + half_rtt) - pending.req.arrival;

  // Per-server latency telemetry includes warmup so steering starts with
  // measured servers.
  stats_[static_cast<std::size_t>(ev.server)].window.push(us_to_ms(latency));

  complete_request(pending.req, ev.t + half_rtt, latency, ev.server, sojourn);

  bool midas = cfg_.scheduler == Scheduler::kMidas;
  if (midas && main_started_ && cache_enabled_) {
    const std::string& path = pending.req.key.path;
    if (pending.req.is_write) {
      schedule(ev.t, EvKind::kInvalidation, 0, -1, path);
    } else if (op_is_cacheable(pending.req.op)) {
      auto vit = versions_.find(path);
      std::uint64_t version = vit == versions_.end() ? 0 : vit->second;
      proxies_[static_cast<std::size_t>(pending.proxy)].cache.install(
          path, pending.req.op, version, ev.t, ev.t);
    }
  }

  if (!srv.queue.empty())
    schedule(ev.t + service_time(ev.server), EvKind::kServiceComplete,
             ev.server);
}

void Experiment::on_invalidation(const Ev& ev) {
  ++versions_[ev.path];
  for (auto& px : proxies_) px.cache.on_invalidation(ev.path, ev.t);
}

void Experiment::on_fast_tick(const Ev& ev) {
  MicroTime now = ev.t;
  const auto& d = cfg_.control.defaults;

  std::vector<double> lhats(static_cast<std::size_t>(cfg_.servers));
  for (int s = 0; s < cfg_.servers; ++s) {
    auto& st = stats_[static_cast<std::size_t>(s)];
    st.raw_queue =
        static_cast<int>(servers_[static_cast<std::size_t>(s)].queue.size());
    st.tick(d.alpha_fast);
    lhats[static_cast<std::size_t>(s)] = st.lhat;
  }
  snapshot_ = telemetry::make_snapshot(stats_, now);

  double b = telemetry::imbalance(lhats, d.eps);
  double p99_global = 0.0;
  for (const auto& st : stats_)
    if (st.has_latency) p99_global = std::max(p99_global, st.ewma_p99_ms);

  if (!main_started_) {
    warmup_b_samples_.push_back(b);
  } else {
    if (cfg_.queue_trace == QueueTraceMode::kTicks) {
      for (int s = 0; s < cfg_.servers; ++s)
        queues_csv_.write(
            fmt_ms(rel(now)) + "," + std::to_string(s) + "," +
            std::to_string(
                servers_[static_cast<std::size_t>(s)].queue.size()) +
            "\n");
    } else {
      for (int s = 0; s < cfg_.servers; ++s) queue_row(now, s);
    }
    for (int s = 0; s < cfg_.servers; ++s) {
      const auto& st = stats_[static_cast<std::size_t>(s)];
      std::string row;
      row.reserve(96);
      row += fmt_ms(rel(now));
      row += ',';
      row += std::to_string(s);
      row += ',';
      row += std::to_string(st.raw_queue);
      row += ',';
      row += fmt_g(st.lhat);
      row += ',';
      row += fmt_g(st.ewma_p50_ms);
      row += ',';
      row += fmt_g(st.ewma_p99_ms);
      row += '\n';
      telemetry_csv_.write(row);
    }

    if (cfg_.scheduler == Scheduler::kMidas && targets_ready_) {
      telemetry::PressureInputs pin;
      pin.b = b;
      pin.b_tgt = targets_.b_tgt;
      pin.p99_ms = p99_global;
      pin.p99_tgt_ms = targets_.p99_tgt_ms;
      pin.w1 = d.w1;
      pin.w2 = d.w2;
      double p = telemetry::pressure(pin);
      max_pressure_ = std::max(max_pressure_, p);
      if (p >= d.h_up) last_tick_above_h_up_ = now;
      if (cfg_.keep_traces) pressure_trace_.emplace_back(rel(now), p);
      for (auto& px : proxies_) px.controller->fast_tick(p, px.jitter_rng);

      const auto& k = proxies_[0].controller->knobs();
      auto& budget = proxies_[0].router->budget();
      std::string row;
      row.reserve(160);
      row += fmt_ms(rel(now));
      row += ',';
      row += fmt_g(b);
      row += ',';
      row += fmt_g(p99_global);
      row += ',';
      row += fmt_g(p);
      row += ',';
      row += std::to_string(k.d);
      row += ',';
      row += std::to_string(k.delta_l);
      row += ',';
      row += fmt_ms(k.delta_t_us);
      row += ',';
      row += fmt_g(k.f_max);
      row += ',';
      row += std::to_string(budget.window_eligible(now));
      row += ',';
      row += std::to_string(budget.window_steered(now));
      row += ',';
      row += std::to_string(proxies_[0].controller->escalations());
      row += ',';
      row += std::to_string(proxies_[0].controller->deescalations());
      row += '\n';
      control_csv_.write(row);
    }
  }

  schedule(now + d.t_fast_us, EvKind::kFastTick);
}

void Experiment::on_slow_tick(const Ev& ev) {
  MicroTime now = ev.t;
  for (int p = 0; p < cfg_.proxies; ++p) {
    auto rows = proxies_[static_cast<std::size_t>(p)].cache.slow_tick(now);
    for (const auto& r : rows) {
      std::string row;
      row.reserve(128);
      row += fmt_ms(rel(now));
      row += ',';
      row += std::to_string(p);
      row += ',';
      row += r.class_id;
      row += ',';
      row += fmt_g(r.hazard_per_ms);
      row += ',';
      row += fmt_g(r.write_fraction);
      row += ',';
      row += fmt_g(r.ttl_ms);
      row += ',';
      row += fmt_g(r.hit_ratio);
      row += ',';
      row += std::to_string(r.stale_serves);
      row += '\n';
      cache_csv_.write(row);
    }
  }

  if (cfg_.proxies >= 2) {
    for (int p = 0; p < cfg_.proxies; ++p) {
      int peer = static_cast<int>(
          gossip_rng_.uniform_below(static_cast<std::uint64_t>(cfg_.proxies - 1)));
      if (peer >= p) ++peer;
      auto& a = proxies_[static_cast<std::size_t>(p)].cache;
      auto& b = proxies_[static_cast<std::size_t>(peer)].cache;
      auto da = a.digest(p, now);
      auto db = b.digest(peer, now);
      a.merge(db, now);
      b.merge(da, now);
    }
  }

  schedule(now + cfg_.control.defaults.t_slow_us, EvKind::kSlowTick);
}

void Experiment::on_warmup_end(const Ev& ev) {
  MicroTime now = ev.t;
  double rtt_measured = median_of(warmup_transport_ms_);
  try {
    targets_ = control::derive_targets(warmup_b_samples_,
                                       warmup_latencies_ms_, rtt_measured,
                                       cfg_.control.warmup_us);
  } catch (const std::runtime_error& e) {
    throw ConfigError("control.warmup_s", e.what());
  }
  targets_ready_ = true;
  main_started_ = true;
  cache_enabled_ = cfg_.cache.mode != cache::CacheMode::kOff;

  for (int s = 0; s < cfg_.servers; ++s) {
    servers_[static_cast<std::size_t>(s)].integ.reset(now);
    queue_row(now, s);
  }
  pull_next_arrival();
}

RunResult Experiment::run() {
  setup();
  while (!done_ && !events_.empty()) {
    Ev ev = events_.top();
    events_.pop();
    clock_.advance_to(ev.t);
    switch (ev.kind) {
      case EvKind::kArrival: on_arrival(ev); break;
      case EvKind::kServerArrive: on_server_arrive(ev); break;
      case EvKind::kServiceComplete: on_service_complete(ev); break;
      case EvKind::kInvalidation: on_invalidation(ev); break;
      case EvKind::kFastTick: on_fast_tick(ev); break;
      case EvKind::kSlowTick: on_slow_tick(ev); break;
      case EvKind::kWarmupEnd: on_warmup_end(ev); break;
      case EvKind::kRunEnd: done_ = true; break;
    }
  }
  RunResult result;
  finalize(result);
  return result;
}

void Experiment::finalize(RunResult& result) {
  const MicroTime end = main_end_abs_;
  result.scheduler = scheduler_name(cfg_.scheduler);
  result.workload_pattern = pattern_name(cfg_.workload.pattern);
  result.seed = cfg_.seed;
  result.main_start_us = 0;
  result.main_end_us = cfg_.workload.duration_us;

  result.servers.resize(static_cast<std::size_t>(cfg_.servers));
  MicroTime window = cfg_.workload.duration_us;
  for (int s = 0; s < cfg_.servers; ++s) {
    auto& srv = servers_[static_cast<std::size_t>(s)];
    srv.integ.close(end);
    auto& out = result.servers[static_cast<std::size_t>(s)];
    out.queue_integral_qus = srv.integ.integral;
    out.max_queue = srv.integ.max_q;
    out.arrivals = srv.arrivals;
    out.completions = srv.completions;
    out.time_avg_queue =
        static_cast<double>(srv.integ.integral) / static_cast<double>(window);
    // Whole-run conservation: everything that entered a server either
    // finished or is still queued.
    if (srv.arrivals !=
        srv.completions + static_cast<std::int64_t>(srv.queue.size()))
      throw std::logic_error("per-server conservation violated");
  }

  double total_integral = 0.0;
  result.max_queue = 0;
  for (const auto& s : result.servers) {
    total_integral += static_cast<double>(s.queue_integral_qus);
    result.max_queue = std::max(result.max_queue, s.max_queue);
  }
  result.mean_queue = total_integral / (static_cast<double>(window) *
                                        static_cast<double>(cfg_.servers));
  result.dispersion = metrics::dispersion(result.servers);

  result.arrivals = arrivals_main_;
  result.completed = completed_main_;
  std::int64_t in_system = 0;
  for (const auto& [id, p] : inflight_)
    if (id < kWarmupIdBase) ++in_system;
  result.in_system_at_end = in_system;
  if (arrivals_main_ != completed_main_ + in_system)
    throw std::logic_error("global conservation violated");

  if (!latencies_us_.empty()) {
    std::vector<MicroTime> sorted = latencies_us_;
    std::sort(sorted.begin(), sorted.end());
    auto rank = [&](double q) {
      std::size_t r = static_cast<std::size_t>(
          std::ceil(q * static_cast<double>(sorted.size())));
      if (r < 1) r = 1;
      return sorted[r - 1];
    };
    result.latency_p50_ms = us_to_ms(rank(0.5));
    result.latency_p99_ms = us_to_ms(rank(0.99));
    double sum = 0.0;
    for (MicroTime v : sorted) sum += static_cast<double>(v);
    result.latency_mean_ms =
        us_to_ms(static_cast<MicroTime>(0)) +
        sum / (1000.0 * static_cast<double>(sorted.size()));
  }

  result.sojourn_count = sojourn_count_;
  if (sojourn_count_ > 0)
    result.sojourn_mean_ms = static_cast<double>(sojourn_sum_us_) /
                             (1000.0 * static_cast<double>(sojourn_count_));

  for (const auto& px : proxies_) {
    result.cache_hits += px.cache.hits();
    result.cache_misses += px.cache.misses();
    result.pins_created += px.router->pins_created();
    result.pin_hits += px.router->pin_hits();
  }
  result.stale_serves = stale_serves_;

  result.decisions = decisions_;
  result.steered = steered_;
  result.eligible = eligible_;

  double f_bound = cfg_.control.defaults.adapt_f_max
                       ? cfg_.control.defaults.f_cap
                       : std::min(cfg_.control.defaults.f_max0,
                                  cfg_.control.defaults.f_cap);
  result.budget_violations = metrics::budget_window_violations(
      decision_log_, cfg_.control.defaults.reroute_window_us, f_bound);
  result.lyapunov_violations = metrics::lyapunov_violations(decision_log_);
  result.pin_violations = pin_violations_;

  result.targets = targets_;
  if (cfg_.scheduler == Scheduler::kMidas && !proxies_.empty()) {
    result.escalations = proxies_[0].controller->escalations();
    result.deescalations = proxies_[0].controller->deescalations();
  }
  result.max_pressure = max_pressure_;
  result.last_tick_above_h_up =
      last_tick_above_h_up_ < 0 ? -1 : rel(last_tick_above_h_up_);

  result.arrival_hash = arrivals_csv_.hash();
  result.decision_hash = decisions_csv_.hash();

  if (cfg_.keep_traces) {
    result.latencies_us = std::move(latencies_us_);
    result.decision_log = std::move(decision_log_);
    result.pressure_trace = std::move(pressure_trace_);
  }

  if (!out_dir_.empty()) {
    std::ofstream cfg_file(out_dir_ + "/config.json");
    cfg_file << config_to_json(cfg_);
    std::ofstream sum(out_dir_ + "/summary.json");
    sum << summary_to_json(result);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config,
                         const std::string& out_dir) {
  config.validate();
  Experiment exp(config, out_dir);
  return exp.run();
}

std::string summary_to_json(const metrics::RunResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = "midas-summary-v1";
  j["scheduler"] = r.scheduler;
  j["workload"] = r.workload_pattern;
  j["seed"] = r.seed;
  j["main_start_ms"] = us_to_ms(r.main_start_us);
  j["main_end_ms"] = us_to_ms(r.main_end_us);

  nlohmann::ordered_json servers = nlohmann::ordered_json::array();
  for (const auto& s : r.servers) {
    nlohmann::ordered_json e;
    e["queue_integral_qus"] = s.queue_integral_qus;
    e["max_queue"] = s.max_queue;
    e["arrivals"] = s.arrivals;
    e["completions"] = s.completions;
    e["time_avg_queue"] = s.time_avg_queue;
    servers.push_back(e);
  }
  j["servers"] = servers;

  j["queues"]["mean"] = r.mean_queue;
  j["queues"]["max"] = r.max_queue;
  j["queues"]["dispersion"] = r.dispersion;

  j["requests"]["arrivals"] = r.arrivals;
  j["requests"]["completed"] = r.completed;
  j["requests"]["in_system_at_end"] = r.in_system_at_end;
  j["latency"]["p50_ms"] = r.latency_p50_ms;
  j["latency"]["p99_ms"] = r.latency_p99_ms;
  j["latency"]["mean_ms"] = r.latency_mean_ms;
  j["sojourn"]["count"] = r.sojourn_count;
  j["sojourn"]["mean_ms"] = r.sojourn_mean_ms;

  j["cache"]["hits"] = r.cache_hits;
  j["cache"]["misses"] = r.cache_misses;
  j["cache"]["stale_serves"] = r.stale_serves;

  j["routing"]["decisions"] = r.decisions;
  j["routing"]["steered"] = r.steered;
  j["routing"]["eligible"] = r.eligible;
  j["routing"]["pins_created"] = r.pins_created;
  j["routing"]["pin_hits"] = r.pin_hits;

  j["violations"]["lyapunov"] = r.lyapunov_violations;
  j["violations"]["budget"] = r.budget_violations;
  j["violations"]["pin"] = r.pin_violations;

  j["targets"]["b_tgt"] = r.targets.b_tgt;
  j["targets"]["p99_tgt_ms"] = r.targets.p99_tgt_ms;
  j["targets"]["rtt_ms"] = r.targets.rtt_ms;
  j["targets"]["p99_warm_ms"] = r.targets.p99_warm_ms;

  j["control"]["escalations"] = r.escalations;
  j["control"]["deescalations"] = r.deescalations;
  j["control"]["max_pressure"] = r.max_pressure;
  j["control"]["last_tick_above_h_up_ms"] =
      r.last_tick_above_h_up < 0 ? -1.0 : us_to_ms(r.last_tick_above_h_up);

  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, r.arrival_hash);
  j["hashes"]["arrivals"] = buf;
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, r.decision_hash);
  j["hashes"]["decisions"] = buf;

  return j.dump(2) + "\n";
}

}  // namespace midas::sim

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "midas/control/knobs.hpp"
#include "midas/core/rng.hpp"
#include "midas/core/types.hpp"
#include "midas/routing/ring.hpp"
#include "midas/telemetry/telemetry.hpp"

namespace midas::routing {

/// Servers a request may legally go to: consistent-hash primary first,
/// then ring successors. Namespace constraints (lock ownership, subtree
/// pinning) collapse the set to a singleton.
struct FeasibleSet {
  std::vector<ServerId> servers;
  bool constrained = false;

  ServerId primary() const { return servers.front(); }
};

FeasibleSet feasible_set(const HashRing& ring, const NamespaceKey& key,
                         int k_f, std::optional<ServerId> constraint);

/// shard -> (server, expiry). Entries are pruned lazily on lookup.
class PinTable {
 public:
  std::optional<ServerId> lookup(std::uint64_t shard, MicroTime now) {
    auto it = pins_.find(shard);
    if (it == pins_.end()) return std::nullopt;
    if (it->second.second <= now) {
      pins_.erase(it);
      return std::nullopt;
    }
    return it->second.first;
  }

  void pin(std::uint64_t shard, ServerId server, MicroTime expires_at) {
    pins_[shard] = {server, expires_at};
  }

  std::size_t size() const { return pins_.size(); }

 private:
  std::unordered_map<std::uint64_t, std::pair<ServerId, MicroTime>> pins_;
};

/// Leaky-bucket steering cap. Admission is driven by a credit counter
/// capped at one token: each eligible request refills f_max, each steer
/// consumes one. That makes reroutes <= f_max * eligible + 1 hold in
/// *every* interval of the event stream, not just the window ending now.
/// A sliding time window of recent outcomes is kept alongside for
/// observability and the exported per-window counters.
class RerouteBudget {
 public:
  explicit RerouteBudget(MicroTime window_us) : window_us_(window_us) {}

  /// Record an eligible request at `now` and decide whether it may steer.
  bool admit(MicroTime now, double f_max);

  std::int64_t eligible_total() const { return eligible_total_; }
  std::int64_t steered_total() const { return steered_total_; }
  int window_eligible(MicroTime now);
  int window_steered(MicroTime now);

 private:
  void prune(MicroTime now);

  MicroTime window_us_;
  double credits_ = 1.0;
  std::int64_t eligible_total_ = 0;
  std::int64_t steered_total_ = 0;
  std::deque<std::pair<MicroTime, bool>> events_;  // (time, steered)
};

struct RoutingDecision {
  std::int64_t request_id = 0;
  std::uint64_t shard = 0;
  MicroTime time = 0;
  ServerId primary{0};
  std::vector<ServerId> sampled;
  ServerId chosen{0};
  bool steered = false;
  bool eligible = false;      // margin test passed for some candidate
  bool pin_applied = false;   // a new pin was created by this decision
  bool pin_followed = false;  // an existing pin decided the route
  bool constrained = false;
  MicroTime snapshot_time = 0;
  double lhat_primary = 0.0;
  double lhat_chosen = 0.0;
  int d = 0;
  int delta_l = 0;
  MicroTime delta_t_us = 0;
};

/// Per-proxy routing state: shared ring, local pins and steering budget.
class Router {
 public:
  Router(const HashRing* ring, int k_f, MicroTime pin_duration_us,
         MicroTime budget_window_us)
      : ring_(ring),
        k_f_(k_f),
        pin_duration_us_(pin_duration_us),
        budget_(budget_window_us) {}

  /// One power-of-d decision. Never fails: any unsatisfied margin, cap,
  /// or missing measurement falls back to the consistent-hash primary.
  RoutingDecision route(const Request& req,
                        const telemetry::TelemetrySnapshot& snapshot,
                        const control::ControlKnobs& knobs,
                        std::optional<ServerId> constraint, MicroTime now,
                        Rng& rng);

  /// Primary-only mode (warmup, or K_f = 1 behavior testing).
  RoutingDecision route_primary(const Request& req, MicroTime now) const;

  RerouteBudget& budget() { return budget_; }
  PinTable& pins() { return pins_; }
  std::int64_t pins_created() const { return pins_created_; }
  std::int64_t pin_hits() const { return pin_hits_; }

 private:
  const HashRing* ring_;
  int k_f_;
  MicroTime pin_duration_us_;
  PinTable pins_;
  RerouteBudget budget_;
  std::int64_t pins_created_ = 0;
  std::int64_t pin_hits_ = 0;
};

/// Baseline scheduler: requests assigned sequentially across servers.
class RoundRobin {
 public:
  explicit RoundRobin(int servers) : servers_(servers) {}

  ServerId next() {
    ServerId s{static_cast<int>(counter_ % servers_)};
    ++counter_;
    return s;
  }

 private:
  int servers_;
  std::int64_t counter_ = 0;
};

}  // namespace midas::routing

#include "midas/routing/router.hpp"

#include <algorithm>
#include <stdexcept>

namespace midas::routing {

FeasibleSet feasible_set(const HashRing& ring, const NamespaceKey& key,
                         int k_f, std::optional<ServerId> constraint) {
  if (k_f < 1) throw std::invalid_argument("feasible_set: k_f must be >= 1");
  FeasibleSet fs;
  if (constraint) {
    fs.servers = {*constraint};
    fs.constrained = true;
    return fs;
  }
  // K_f beyond the server count clamps to m.
  fs.servers = ring.successors(key.shard, k_f);
  return fs;
}

bool RerouteBudget::admit(MicroTime now, double f_max) {
  prune(now);
  ++eligible_total_;
  // Carried credit is capped at one whole token before refill; that cap is
  // what bounds steers by f_max * eligible + 1 over any interval.
  credits_ = std::min(credits_, 1.0) + f_max;
  bool steer = credits_ >= 1.0;
  if (steer) {
    credits_ -= 1.0;
    ++steered_total_;
  }
  events_.emplace_back(now, steer);
  return steer;
}

void RerouteBudget::prune(MicroTime now) {
  while (!events_.empty() && events_.front().first <= now - window_us_)
    events_.pop_front();
}

int RerouteBudget::window_eligible(MicroTime now) {
  prune(now);
  return static_cast<int>(events_.size());
}

int RerouteBudget::window_steered(MicroTime now) {
  prune(now);
  int n = 0;
  for (const auto& e : events_)
    if (e.second) ++n;
  return n;
}

RoutingDecision Router::route_primary(const Request& req,
                                      MicroTime now) const {
  RoutingDecision d;
  d.request_id = req.id;
  d.shard = req.key.shard;
  d.time = now;
  d.primary = ring_->lookup(req.key.shard);
  d.chosen = d.primary;
  return d;
}

RoutingDecision Router::route(const Request& req,
                              const telemetry::TelemetrySnapshot& snapshot,
                              const control::ControlKnobs& knobs,
                              std::optional<ServerId> constraint,
                              MicroTime now, Rng& rng) {
  RoutingDecision dec;
  dec.request_id = req.id;
  dec.shard = req.key.shard;
  dec.time = now;
  dec.snapshot_time = snapshot.time;
  dec.d = knobs.d;
  dec.delta_l = knobs.delta_l;
  dec.delta_t_us = knobs.delta_t_us;

  FeasibleSet fs = feasible_set(*ring_, req.key, k_f_, constraint);
  dec.primary = fs.primary();
  dec.chosen = dec.primary;
  dec.constrained = fs.constrained;
  dec.lhat_primary =
      snapshot.rows[static_cast<std::size_t>(dec.primary.index)].lhat;
  dec.lhat_chosen = dec.lhat_primary;

  if (fs.constrained) return dec;

  // A live pin decides the route without re-evaluation.
  if (auto pinned = pins_.lookup(req.key.shard, now)) {
    dec.chosen = *pinned;
    dec.pin_followed = true;
    dec.lhat_chosen =
        snapshot.rows[static_cast<std::size_t>(pinned->index)].lhat;
    ++pin_hits_;
    return dec;
  }

  if (fs.servers.size() < 2) return dec;

  const auto& prow =
      snapshot.rows[static_cast<std::size_t>(dec.primary.index)];
  // An unmeasured primary has no latency baseline to compare against;
  // fail safe to the consistent-hash default.
  if (!prow.measured) return dec;

  // Sample up to d candidates from F(r) \ {primary}, without replacement.
  std::vector<ServerId> pool(fs.servers.begin() + 1, fs.servers.end());
  std::size_t want = std::min(pool.size(), static_cast<std::size_t>(knobs.d));
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng.uniform_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(want);
  dec.sampled = pool;

  // Join-better-than eligibility: beat the primary on both margins.
  double need_lhat = prow.lhat - static_cast<double>(knobs.delta_l);
  double need_p50 = prow.p50_ms - us_to_ms(knobs.delta_t_us);
  std::vector<ServerId> eligible;
  for (ServerId j : pool) {
    const auto& row = snapshot.rows[static_cast<std::size_t>(j.index)];
    if (!row.measured) continue;
    if (row.lhat <= need_lhat && row.p50_ms <= need_p50)
      eligible.push_back(j);
  }
  if (eligible.empty()) return dec;

  dec.eligible = true;
  if (!budget_.admit(now, knobs.f_max)) return dec;  // cap dominates

  // argmin lhat with random tie-break.
  double best = snapshot.rows[static_cast<std::size_t>(eligible[0].index)].lhat;
  for (ServerId j : eligible) {
    best = std::min(best,
                    snapshot.rows[static_cast<std::size_t>(j.index)].lhat);
  }
  std::vector<ServerId> ties;
  for (ServerId j : eligible) {
    if (snapshot.rows[static_cast<std::size_t>(j.index)].lhat == best)
      ties.push_back(j);
  }
  ServerId target =
      ties[static_cast<std::size_t>(rng.uniform_below(ties.size()))];

  dec.chosen = target;
  dec.steered = true;
  dec.lhat_chosen = best;
  pins_.pin(req.key.shard, target, now + pin_duration_us_);
  dec.pin_applied = true;
  ++pins_created_;
  return dec;
}

}  // namespace midas::routing

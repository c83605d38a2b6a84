#include "doctest.h"

#include <map>
#include <set>
#include <string>
#include <vector>

#include "midas/control/control.hpp"
#include "midas/core/hash.hpp"
#include "midas/core/rng.hpp"
#include "midas/metrics/metrics.hpp"
#include "midas/routing/ring.hpp"
#include "midas/routing/router.hpp"

using namespace midas;
using namespace midas::routing;

namespace {

telemetry::TelemetrySnapshot snapshot_of(std::vector<double> lhat,
                                         std::vector<double> p50,
                                         MicroTime time = 0) {
  telemetry::TelemetrySnapshot snap;
  snap.time = time;
  for (std::size_t i = 0; i < lhat.size(); ++i) {
    telemetry::TelemetrySnapshot::Row r;
    r.lhat = lhat[i];
    r.p50_ms = p50[i];
    r.p99_ms = p50[i] * 2;
    r.measured = true;
    snap.rows.push_back(r);
  }
  return snap;
}

Request make_request(std::int64_t id, const std::string& path) {
  Request r;
  r.id = id;
  r.key = NamespaceKey::of(path);
  r.op = OpKind::kLookup;
  return r;
}

}  // namespace

TEST_CASE("single-server ring maps every key to it") {
  auto ring = HashRing::build(1, 8, 99);
  for (int i = 0; i < 100; ++i)
    CHECK(ring.lookup(hash_key("/k" + std::to_string(i))).index == 0);
}

TEST_CASE("ring key shares are within 25% of uniform") {
  const int m = 16, vnodes = 64, n = 100000;
  auto ring = HashRing::build(m, vnodes, 1);
  std::vector<int> count(m, 0);
  for (int i = 0; i < n; ++i)
    ++count[ring.lookup(hash_key("/p" + std::to_string(i))).index];
  for (int c : count) {
    CHECK(c > n / m * 0.75);
    CHECK(c < n / m * 1.25);
  }
}

TEST_CASE("removing one server moves only its arcs") {
  const int m = 16, vnodes = 64, n = 100000;
  auto full = HashRing::build(m, vnodes, 1);
  // The reduced ring keeps identical vnode positions for servers 0..14,
  // so ownership diffs are exactly the removed server's arcs.
  auto reduced = HashRing::build(m - 1, vnodes, 1);
  int moved = 0;
  for (int i = 0; i < n; ++i) {
    std::uint64_t shard = hash_key("/p" + std::to_string(i));
    int a = full.lookup(shard).index;
    int b = reduced.lookup(shard).index;
    if (a == m - 1) {
      ++moved;
      CHECK(b != m - 1);
    } else {
      CHECK(a == b);
    }
  }
  CHECK(moved < n * (1.0 / m + 0.05));
}

TEST_CASE("feasible sets: constraint, successors, degenerate K_f") {
  auto ring = HashRing::build(8, 64, 5);
  NamespaceKey key = NamespaceKey::of("/some/dir");

  auto constrained = feasible_set(ring, key, 4, ServerId{3});
  CHECK(constrained.constrained);
  CHECK(constrained.servers.size() == 1);
  CHECK(constrained.servers[0].index == 3);

  auto fs = feasible_set(ring, key, 4, std::nullopt);
  CHECK(fs.servers.size() == 4);
  CHECK(fs.primary() == ring.lookup(key.shard));
  std::set<int> distinct;
  for (auto s : fs.servers) distinct.insert(s.index);
  CHECK(distinct.size() == 4);
  // Brute-force successor oracle: walk every ring position in order.
  auto oracle = ring.successors(key.shard, 4);
  CHECK(fs.servers.size() == oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i)
    CHECK(fs.servers[i] == oracle[i]);

  auto singleton = feasible_set(ring, key, 1, std::nullopt);
  CHECK(singleton.servers.size() == 1);
  CHECK(singleton.servers[0] == ring.lookup(key.shard));

  auto clamped = feasible_set(ring, key, 64, std::nullopt);
  CHECK(clamped.servers.size() == 8);
}

TEST_CASE("round robin assigns sequentially and exactly") {
  RoundRobin rr(3);
  std::vector<int> got;
  for (int i = 0; i < 6; ++i) got.push_back(rr.next().index);
  CHECK(got == std::vector<int>{0, 1, 2, 0, 1, 2});

  RoundRobin one(1);
  for (int i = 0; i < 5; ++i) CHECK(one.next().index == 0);

  RoundRobin big(3);
  std::map<int, int> count;
  for (int i = 0; i < 3000; ++i) ++count[big.next().index];
  for (auto& [s, c] : count) CHECK(c == 1000);
}

TEST_CASE("route: uniform load never steers") {
  auto ring = HashRing::build(8, 64, 7);
  Router router(&ring, 4, 300000, 1000000);
  control::ControlKnobs knobs{2, 4, 1000, 0.1};
  auto snap = snapshot_of(std::vector<double>(8, 5.0),
                          std::vector<double>(8, 20.0));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto dec = router.route(make_request(i, "/k" + std::to_string(i)), snap,
                            knobs, std::nullopt, 1000 + i, rng);
    CHECK_FALSE(dec.steered);
    CHECK(dec.chosen == dec.primary);
    CHECK_FALSE(dec.eligible);
  }
}

TEST_CASE("route: margins met steers to min-load candidate and pins") {
  auto ring = HashRing::build(2, 64, 7);
  Router router(&ring, 2, 300000, 1000000);
  control::ControlKnobs knobs{1, 4, 5000, 1.0};

  Request req = make_request(1, "/hot/dir");
  int primary = ring.lookup(req.key.shard).index;
  int other = 1 - primary;
  std::vector<double> lhat(2), p50(2);
  lhat[primary] = 10.0;
  lhat[other] = 5.0;
  p50[primary] = 20.0;
  p50[other] = 10.0;
  auto snap = snapshot_of(lhat, p50);

  Rng rng(4);
  auto dec = router.route(req, snap, knobs, std::nullopt, 1000, rng);
  CHECK(dec.steered);
  CHECK(dec.eligible);
  CHECK(dec.chosen.index == other);
  CHECK(dec.pin_applied);
  CHECK(dec.lhat_primary == 10.0);
  CHECK(dec.lhat_chosen == 5.0);

  // Same shard within C follows the pin without re-evaluation.
  auto dec2 = router.route(make_request(2, "/hot/dir"), snap, knobs,
                           std::nullopt, 2000, rng);
  CHECK(dec2.pin_followed);
  CHECK_FALSE(dec2.steered);
  CHECK(dec2.chosen.index == other);

  // After expiry the shard is evaluated again.
  auto dec3 = router.route(make_request(3, "/hot/dir"), snap, knobs,
                           std::nullopt, 1000 + 300000, rng);
  CHECK_FALSE(dec3.pin_followed);
}

TEST_CASE("route: budget exhaustion keeps the primary despite eligibility") {
  auto ring = HashRing::build(2, 64, 7);
  Router router(&ring, 2, 1000, 1000000);  // 1ms pins so pins don't mask
  control::ControlKnobs knobs{1, 4, 5000, 0.1};

  std::vector<double> lhat(2), p50(2);
  Request probe = make_request(0, "/hot/dir");
  int primary = ring.lookup(probe.key.shard).index;
  int other = 1 - primary;
  lhat[primary] = 50.0;
  lhat[other] = 1.0;
  p50[primary] = 100.0;
  p50[other] = 1.0;
  auto snap = snapshot_of(lhat, p50);

  Rng rng(4);
  int steers = 0, eligibles = 0;
  for (int i = 0; i < 1000; ++i) {
    auto dec = router.route(make_request(i, "/hot/dir"), snap, knobs,
                            std::nullopt, 10000 + i * 2000, rng);
    if (dec.eligible) ++eligibles;
    if (dec.steered) ++steers;
    if (dec.eligible && !dec.steered) CHECK(dec.chosen == dec.primary);
  }
  CHECK(eligibles > 0);
  CHECK(steers <= static_cast<int>(0.1 * eligibles + 1));
  CHECK(steers > 0);
}

TEST_CASE("route: constrained requests are never steered") {
  auto ring = HashRing::build(8, 64, 7);
  Router router(&ring, 4, 300000, 1000000);
  control::ControlKnobs knobs{4, 2, 1000, 1.0};
  auto snap = snapshot_of({50, 0, 0, 0, 0, 0, 0, 0},
                          {200, 1, 1, 1, 1, 1, 1, 1});
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    auto dec = router.route(make_request(i, "/locked"), snap, knobs,
                            ServerId{0}, 1000 + i, rng);
    CHECK(dec.constrained);
    CHECK_FALSE(dec.steered);
    CHECK(dec.chosen.index == 0);
  }
}

TEST_CASE("route: unmeasured candidates are not steering targets") {
  auto ring = HashRing::build(2, 64, 7);
  Router router(&ring, 2, 300000, 1000000);
  control::ControlKnobs knobs{1, 2, 1000, 1.0};

  Request req = make_request(1, "/hot/dir");
  int primary = ring.lookup(req.key.shard).index;
  int other = 1 - primary;
  auto snap = snapshot_of({0, 0}, {0, 0});
  snap.rows[static_cast<std::size_t>(primary)].lhat = 50.0;
  snap.rows[static_cast<std::size_t>(primary)].p50_ms = 100.0;
  snap.rows[static_cast<std::size_t>(other)].measured = false;

  Rng rng(2);
  auto dec = router.route(req, snap, knobs, std::nullopt, 1000, rng);
  CHECK_FALSE(dec.steered);
  CHECK(dec.chosen == dec.primary);
}

TEST_CASE("budget satisfies the windowed cap for adversarial event trains") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    RerouteBudget budget(1000000);
    double f_max = 0.05 + 0.2 * rng.uniform01();
    std::vector<metrics::DecisionRecord> log;
    MicroTime t = 0;
    int n = 500 + static_cast<int>(rng.uniform_below(1500));
    for (int i = 0; i < n; ++i) {
      // Bursty gaps: mostly dense, occasionally a long pause.
      t += rng.uniform01() < 0.9 ? rng.uniform_int(1, 20000)
                                 : rng.uniform_int(500000, 3000000);
      bool steer = budget.admit(t, f_max);
      metrics::DecisionRecord rec;
      rec.time = t;
      rec.proxy = 0;
      rec.eligible = true;
      rec.steered = steer;
      rec.lhat_primary = 10.0;
      rec.lhat_chosen = 1.0;
      log.push_back(rec);
    }
    CHECK(metrics::budget_window_violations(log, 1000000, f_max) == 0);
  }
}

TEST_CASE("steered decisions always satisfy the potential-step bound") {
  auto ring = HashRing::build(8, 64, 3);
  Router router(&ring, 4, 1000, 1000000);
  Rng rng(31);
  Rng load_rng(32);
  std::vector<metrics::DecisionRecord> log;
  for (int i = 0; i < 5000; ++i) {
    control::ControlKnobs knobs;
    knobs.d = 1 + static_cast<int>(load_rng.uniform_below(4));
    knobs.delta_l = 2 + static_cast<int>(load_rng.uniform_below(7));
    knobs.delta_t_us = 1000;
    knobs.f_max = 1.0;
    std::vector<double> lhat(8), p50(8);
    for (int s = 0; s < 8; ++s) {
      lhat[s] = load_rng.uniform_range(0.0, 30.0);
      p50[s] = load_rng.uniform_range(0.0, 300.0);
    }
    auto snap = snapshot_of(lhat, p50);
    auto dec = router.route(make_request(i, "/k" + std::to_string(i)), snap,
                            knobs, std::nullopt, 10000 + i * 2000, rng);
    if (dec.steered) {
      CHECK(dec.lhat_primary - dec.lhat_chosen >=
            static_cast<double>(knobs.delta_l));
      metrics::DecisionRecord rec;
      rec.time = dec.time;
      rec.eligible = true;
      rec.steered = true;
      rec.lhat_primary = dec.lhat_primary;
      rec.lhat_chosen = dec.lhat_chosen;
      log.push_back(rec);
    }
  }
  CHECK(log.size() > 100);  // the scenario must actually exercise steering
  CHECK(metrics::lyapunov_violations(log) == 0);
}

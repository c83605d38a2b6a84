#include "midas/cache/cache.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "midas/core/hash.hpp"

namespace midas::cache {

namespace {

constexpr OpKind kCacheableOps[] = {OpKind::kLookup, OpKind::kGetattr,
                                    OpKind::kReaddir, OpKind::kStat};

}  // namespace

void hazard_update(CacheClass& cls, MicroTime now, double alpha_slow) {
  if (!cls.has_hazard) {
    // No prior invalidation: seed from the class's observation span.
    MicroTime dt0 = std::max<MicroTime>(now - cls.created_at, 1);
    cls.hazard_per_ms = 1.0 / us_to_ms(dt0);
    cls.has_hazard = true;
  } else {
    MicroTime dt = std::max<MicroTime>(now - cls.last_invalidation, 1);
    cls.hazard_per_ms = (1.0 - alpha_slow) * cls.hazard_per_ms +
                        alpha_slow * (1.0 / us_to_ms(dt));
  }
  cls.last_invalidation = now;
  ++cls.invalidations;
}

MicroTime ttl_update(const CacheClass& cls, double p_star,
                     std::optional<MicroTime> lease_remaining_us,
                     double gamma, double w_high, MicroTime ttl_min_us,
                     MicroTime ttl_max_us) {
  if (!(p_star > 0.0 && p_star < 1.0))
    throw std::invalid_argument("ttl_update: p_star must be in (0, 1)");
  double ttl_ms;
  if (cls.has_hazard && cls.hazard_per_ms > 0.0) {
    ttl_ms = -std::log1p(-p_star) / cls.hazard_per_ms;
  } else {
    // Zero observed hazard: cap at ttl_max so the class is re-examined
    // every slow tick.
    ttl_ms = us_to_ms(ttl_max_us);
  }
  MicroTime ttl = ms_to_us(std::min(ttl_ms, us_to_ms(ttl_max_us)));
  if (lease_remaining_us) ttl = std::min(ttl, *lease_remaining_us);
  if (cls.write_fraction > w_high)
    ttl = static_cast<MicroTime>(std::llround(gamma * static_cast<double>(ttl)));
  ttl = std::clamp(ttl, ttl_min_us, ttl_max_us);
  return ttl;
}

std::size_t ProxyCache::EntryKeyHash::operator()(const EntryKey& k) const {
  return static_cast<std::size_t>(
      mix64(fnv1a64(k.path) ^ (static_cast<std::uint64_t>(k.op) << 56)));
}

std::string ProxyCache::dir_prefix(const std::string& path) const {
  // First `class_prefix_depth` components of the path.
  int depth = params_.class_prefix_depth;
  std::size_t pos = 0;
  int seen = 0;
  while (pos < path.size() && seen < depth) {
    std::size_t next = path.find('/', pos + 1);
    if (next == std::string::npos) return path;
    pos = next;
    ++seen;
  }
  return path.substr(0, pos == 0 ? path.size() : pos);
}

std::string ProxyCache::class_id_for(const std::string& path,
                                     OpKind op) const {
  return dir_prefix(path) + "|" + op_kind_name(op);
}

CacheClass& ProxyCache::class_for(const std::string& path, OpKind op,
                                  MicroTime now) {
  std::string id = class_id_for(path, op);
  auto it = classes_.find(id);
  if (it == classes_.end()) {
    CacheClass cls;
    cls.id = id;
    cls.created_at = now;
    // Before the slow loop has hazard evidence, TTL-mode classes start at
    // the transport floor. Lease-mode entries are kept coherent by
    // revocation tokens, so they may live out the lease from the start.
    cls.ttl_us = params_.mode == CacheMode::kLease
                     ? std::min(params_.lease_us, params_.ttl_max_us)
                     : params_.ttl_min_us;
    it = classes_.emplace(id, std::move(cls)).first;
  }
  return it->second;
}

std::optional<std::uint64_t> ProxyCache::lookup(const std::string& path,
                                                OpKind op, MicroTime now) {
  if (op_is_write(op))
    throw std::logic_error("ProxyCache::lookup: write op queried");
  auto it = index_.find(EntryKey{path, op});
  if (it == index_.end()) return std::nullopt;
  auto entry_it = it->second;
  if (now >= entry_it->deadline) {  // never served at or past the horizon
    erase_entry(entry_it);
    return std::nullopt;
  }
  std::uint64_t version = entry_it->version;
  lru_.splice(lru_.begin(), lru_, entry_it);
  return version;
}

void ProxyCache::install(const std::string& path, OpKind op,
                         std::uint64_t version, MicroTime grant,
                         MicroTime now) {
  if (!op_is_cacheable(op)) return;
  if (params_.mode == CacheMode::kOff) return;
  if (params_.mode == CacheMode::kLease) {
    auto tok = last_token_.find(path);
    // The lease was revoked while the response was in flight.
    if (tok != last_token_.end() && grant <= tok->second) return;
  }

  CacheClass& cls = class_for(path, op, now);
  MicroTime ttl = cls.ttl_us;
  if (params_.mode == CacheMode::kLease) ttl = std::min(ttl, params_.lease_us);
  Entry entry;
  entry.key = EntryKey{path, op};
  entry.version = version;
  entry.grant = grant;
  entry.deadline = grant + ttl;
  entry.class_id = cls.id;
  if (entry.deadline <= now) return;  // already expired in transit
  insert_entry(std::move(entry));
}

void ProxyCache::insert_entry(Entry entry) {
  auto it = index_.find(entry.key);
  if (it != index_.end()) erase_entry(it->second);
  lru_.push_front(std::move(entry));
  index_[lru_.front().key] = lru_.begin();
  while (index_.size() > params_.capacity) {
    erase_entry(std::prev(lru_.end()));
  }
}

void ProxyCache::erase_entry(std::list<Entry>::iterator it) {
  index_.erase(it->key);
  lru_.erase(it);
}

void ProxyCache::on_invalidation(const std::string& path, MicroTime now) {
  if (params_.mode == CacheMode::kOff) return;
  // Every read-op class of the path's prefix experiences the invalidation.
  for (OpKind op : kCacheableOps) {
    std::string id = class_id_for(path, op);
    auto it = classes_.find(id);
    if (it != classes_.end()) {
      hazard_update(it->second, now, params_.alpha_slow);
      ++it->second.interval_writes;
    }
  }
  if (params_.mode == CacheMode::kLease) {
    last_token_[path] = now;
    for (OpKind op : kCacheableOps) {
      auto it = index_.find(EntryKey{path, op});
      if (it != index_.end()) erase_entry(it->second);
    }
  }
}

void ProxyCache::note_read(const std::string& path, OpKind op, MicroTime now,
                           bool hit) {
  if (params_.mode == CacheMode::kOff) return;
  CacheClass& cls = class_for(path, op, now);
  ++cls.interval_reads;
  if (hit) {
    ++cls.hits;
    ++hits_;
  } else {
    ++cls.misses;
    ++misses_;
  }
}

void ProxyCache::note_stale_serve(const std::string& path, OpKind op) {
  ++stale_serves_;
  auto it = classes_.find(class_id_for(path, op));
  if (it != classes_.end()) ++it->second.stale_serves;
}

std::vector<ClassCsvRow> ProxyCache::slow_tick(MicroTime now) {
  // Revocation tokens only matter against in-flight grants; drop old ones.
  std::erase_if(last_token_, [&](const auto& kv) {
    return kv.second < now - params_.lease_us;
  });

  std::vector<ClassCsvRow> rows;
  rows.reserve(classes_.size());
  for (auto& [id, cls] : classes_) {
    std::int64_t ops = cls.interval_reads + cls.interval_writes;
    if (ops > 0) {
      double sample = static_cast<double>(cls.interval_writes) /
                      static_cast<double>(ops);
      if (!cls.write_fraction_init) {
        cls.write_fraction = sample;
        cls.write_fraction_init = true;
      } else {
        cls.write_fraction = (1.0 - params_.alpha_slow) * cls.write_fraction +
                             params_.alpha_slow * sample;
      }
    }
    if (params_.mode == CacheMode::kLease) {
      // Revocation tokens keep lease-mode entries coherent, so the
      // validity horizon is the lease itself. The hazard-driven bound
      // protects deployments without invalidation support.
      cls.ttl_us = std::min(params_.lease_us, params_.ttl_max_us);
    } else {
      cls.ttl_us = ttl_update(cls, params_.p_star, std::nullopt,
                              params_.gamma, params_.w_high,
                              params_.ttl_min_us, params_.ttl_max_us);
    }
    std::int64_t lookups = cls.hits + cls.misses;
    ClassCsvRow row;
    row.class_id = id;
    row.hazard_per_ms = cls.hazard_per_ms;
    row.write_fraction = cls.write_fraction;
    row.ttl_ms = us_to_ms(cls.ttl_us);
    row.hit_ratio = lookups > 0 ? static_cast<double>(cls.hits) /
                                      static_cast<double>(lookups)
                                : 0.0;
    row.stale_serves = cls.stale_serves;
    rows.push_back(std::move(row));
    cls.interval_reads = 0;
    cls.interval_writes = 0;
  }
  return rows;
}

GossipDigest ProxyCache::digest(int origin_proxy, MicroTime now) const {
  GossipDigest d;
  d.origin_proxy = origin_proxy;
  d.emitted = now;
  d.entries.reserve(index_.size());
  for (const Entry& e : lru_) {
    if (e.deadline <= now) continue;  // expired entries never travel
    GossipEntry ge;
    ge.path = e.key.path;
    ge.op = e.key.op;
    ge.version = e.version;
    ge.grant = e.grant;
    ge.deadline = e.deadline;
    d.entries.push_back(std::move(ge));
  }
  return d;
}

void ProxyCache::merge(const GossipDigest& digest, MicroTime now) {
  if (params_.mode == CacheMode::kOff) return;
  for (const GossipEntry& ge : digest.entries) {
    if (ge.deadline <= now) continue;
    if (params_.mode == CacheMode::kLease) {
      auto tok = last_token_.find(ge.path);
      if (tok != last_token_.end() && ge.grant <= tok->second) continue;
    }
    EntryKey key{ge.path, ge.op};
    auto it = index_.find(key);
    if (it == index_.end()) {
      Entry entry;
      entry.key = key;
      entry.version = ge.version;
      entry.grant = ge.grant;
      entry.deadline = ge.deadline;
      entry.class_id = class_id_for(ge.path, ge.op);
      insert_entry(std::move(entry));
      continue;
    }
    Entry& local = *it->second;
    // Earlier-expiring side wins wholly; ties resolve to the smaller
    // version. Deadlines are never extended.
    bool adopt = ge.deadline < local.deadline ||
                 (ge.deadline == local.deadline && ge.version < local.version);
    if (adopt) {
      local.version = ge.version;
      local.grant = ge.grant;
      local.deadline = ge.deadline;
    }
  }
}

}  // namespace midas::cache

#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "midas/core/rng.hpp"
#include "midas/core/types.hpp"

namespace midas::cache {

enum class CacheMode { kOff, kLease, kTtl };

struct CacheParams {
  CacheMode mode = CacheMode::kOff;
  std::size_t capacity = 64 * 1024;
  MicroTime ttl_min_us = 1000;        // transport floor, one RTT
  MicroTime ttl_max_us = 30000000;    // zero-hazard ceiling, one slow tick
  MicroTime lease_us = 30000000;      // server-granted validity horizon
  double p_star = 1e-4;               // target stale probability
  double gamma = 0.5;                 // TTL shrink for write-heavy classes
  double w_high = 0.3;                // write-fraction threshold
  double alpha_slow = 0.1;            // hazard / write-mix EWMA weight
  int class_prefix_depth = 1;         // namespace levels in the class id
};

/// Per-class adaptive state: invalidation hazard, write mix, current TTL.
struct CacheClass {
  std::string id;
  double hazard_per_ms = 0.0;
  bool has_hazard = false;
  MicroTime created_at = 0;
  MicroTime last_invalidation = 0;
  MicroTime ttl_us = 0;
  double write_fraction = 0.0;
  bool write_fraction_init = false;
  // interval counters, reset every slow tick
  std::int64_t interval_reads = 0;
  std::int64_t interval_writes = 0;
  // cumulative
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  std::int64_t invalidations = 0;
  std::int64_t stale_serves = 0;
};

/// One hazard observation: EWMA of 1/dt over invalidation inter-arrivals.
/// The first observation seeds the estimate with the class's own
/// observation span. dt clamps to one microsecond.
void hazard_update(CacheClass& cls, MicroTime now, double alpha_slow);

/// Slow-loop TTL policy:
///   ttl = -ln(1 - p*) / hazard      (ttl_max when hazard is zero)
///   capped by lease_remaining when leases exist,
///   scaled by gamma when the class is write-heavy,
///   floored at ttl_min and ceilinged at ttl_max.
MicroTime ttl_update(const CacheClass& cls, double p_star,
                     std::optional<MicroTime> lease_remaining_us,
                     double gamma, double w_high, MicroTime ttl_min_us,
                     MicroTime ttl_max_us);

struct GossipEntry {
  std::string path;
  OpKind op = OpKind::kLookup;
  std::uint64_t version = 0;
  MicroTime grant = 0;
  MicroTime deadline = 0;
};

struct GossipDigest {
  int origin_proxy = 0;
  MicroTime emitted = 0;
  std::vector<GossipEntry> entries;  // never contains expired entries
};

struct ClassCsvRow {
  std::string class_id;
  double hazard_per_ms;
  double write_fraction;
  double ttl_ms;
  double hit_ratio;
  std::int64_t stale_serves;
};

/// Read-mostly metadata cache for one proxy. Values are opaque version
/// numbers; the simulator's ground-truth table decides what counts as
/// stale. Entries are never served at or past their validity deadline.
class ProxyCache {
 public:
  ProxyCache() = default;
  explicit ProxyCache(const CacheParams& params) : params_(params) {}

  /// Hit iff an entry exists and now < deadline. Expired entries are
  /// evicted on the way out. Throws on write ops: writers must not
  /// consult the cache.
  std::optional<std::uint64_t> lookup(const std::string& path, OpKind op,
                                      MicroTime now);

  /// Install a response fetched from a server. `grant` is the server-side
  /// completion time that anchors the validity horizon. Installs are
  /// dropped when an invalidation token arrived after the grant.
  void install(const std::string& path, OpKind op, std::uint64_t version,
               MicroTime grant, MicroTime now);

  /// A write to `path` was applied at `now`. Updates hazard and write-mix
  /// statistics for the affected classes; in lease mode also revokes every
  /// cached entry for the path and remembers the token for in-flight
  /// grant suppression.
  void on_invalidation(const std::string& path, MicroTime now);

  /// Count a read against its class's interval statistics.
  void note_read(const std::string& path, OpKind op, MicroTime now,
                 bool hit);

  /// Recompute every class TTL. Returns rows for the per-tick export.
  std::vector<ClassCsvRow> slow_tick(MicroTime now);

  GossipDigest digest(int origin_proxy, MicroTime now) const;

  /// Merge a peer digest. Deadlines are never extended; when both sides
  /// hold a key the earlier-expiring entry wins wholly so peers converge
  /// to identical values for shared keys.
  void merge(const GossipDigest& digest, MicroTime now);

  void note_stale_serve(const std::string& path, OpKind op);

  std::size_t size() const { return index_.size(); }
  CacheMode mode() const { return params_.mode; }
  const CacheParams& params() const { return params_; }
  std::int64_t hits() const { return hits_; }
  std::int64_t misses() const { return misses_; }
  std::int64_t stale_serves() const { return stale_serves_; }

  std::string class_id_for(const std::string& path, OpKind op) const;

 private:
  struct EntryKey {
    std::string path;
    OpKind op;
    bool operator==(const EntryKey&) const = default;
  };
  struct EntryKeyHash {
    std::size_t operator()(const EntryKey& k) const;
  };
  struct Entry {
    EntryKey key;
    std::uint64_t version = 0;
    MicroTime grant = 0;
    MicroTime deadline = 0;
    std::string class_id;
  };

  CacheClass& class_for(const std::string& path, OpKind op, MicroTime now);
  void erase_entry(std::list<Entry>::iterator it);
  void insert_entry(Entry entry);
  std::string dir_prefix(const std::string& path) const;

  CacheParams params_;
  std::list<Entry> lru_;  // front = most recent
  std::unordered_map<EntryKey, std::list<Entry>::iterator, EntryKeyHash>
      index_;
  std::map<std::string, CacheClass> classes_;  // ordered for stable export
  std::unordered_map<std::string, MicroTime> last_token_;
  std::int64_t hits_ = 0;
  std::int64_t misses_ = 0;
  std::int64_t stale_serves_ = 0;
};

}  // namespace midas::cache

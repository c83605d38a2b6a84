#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "midas/core/types.hpp"

namespace midas::routing {

/// Consistent-hash ring with virtual nodes. Positions are a pure
/// function of (seed, server index, vnode index), so the ring is
/// reproducible and removing one server moves only that server's arcs.
class HashRing {
 public:
  /// servers >= 1, vnodes_per_server >= 1.
  static HashRing build(int servers, int vnodes_per_server,
                        std::uint64_t seed);

  /// Owner of the arc containing `shard`.
  ServerId lookup(std::uint64_t shard) const;

  /// Up to `count` distinct servers walking clockwise from the shard's
  /// position; element 0 is the primary owner.
  std::vector<ServerId> successors(std::uint64_t shard, int count) const;

  int server_count() const { return servers_; }
  int vnodes_per_server() const { return vnodes_; }
  std::size_t size() const { return ring_.size(); }

 private:
  int servers_ = 0;
  int vnodes_ = 0;
  std::vector<std::pair<std::uint64_t, int>> ring_;  // sorted by position
};

}  // namespace midas::routing

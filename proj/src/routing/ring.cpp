#include "midas/routing/ring.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "midas/core/hash.hpp"

namespace midas::routing {

HashRing HashRing::build(int servers, int vnodes_per_server,
                         std::uint64_t seed) {
  if (servers < 1)
    throw std::invalid_argument("HashRing: need at least one server");
  if (vnodes_per_server < 1)
    throw std::invalid_argument("HashRing: need at least one vnode");

  HashRing ring;
  ring.servers_ = servers;
  ring.vnodes_ = vnodes_per_server;
  ring.ring_.reserve(static_cast<std::size_t>(servers) * vnodes_per_server);
  for (int s = 0; s < servers; ++s) {
    for (int v = 0; v < vnodes_per_server; ++v) {
      std::string label = "vn/" + std::to_string(s) + "/" + std::to_string(v);
      std::uint64_t pos = mix64(fnv1a64(label) ^ seed);
      ring.ring_.emplace_back(pos, s);
    }
  }
  std::sort(ring.ring_.begin(), ring.ring_.end());
  return ring;
}

ServerId HashRing::lookup(std::uint64_t shard) const {
  auto it = std::upper_bound(
      ring_.begin(), ring_.end(), shard,
      [](std::uint64_t v, const auto& e) { return v < e.first; });
  if (it == ring_.end()) it = ring_.begin();
  return ServerId{it->second};
}

std::vector<ServerId> HashRing::successors(std::uint64_t shard,
                                           int count) const {
  if (count < 1) count = 1;
  if (count > servers_) count = servers_;
  std::vector<ServerId> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<bool> seen(static_cast<std::size_t>(servers_), false);

  auto it = std::upper_bound(
      ring_.begin(), ring_.end(), shard,
      [](std::uint64_t v, const auto& e) { return v < e.first; });
  std::size_t idx = (it == ring_.end())
                        ? 0
                        : static_cast<std::size_t>(it - ring_.begin());
  for (std::size_t walked = 0;
       walked < ring_.size() && out.size() < static_cast<std::size_t>(count);
       ++walked) {
    int s = ring_[(idx + walked) % ring_.size()].second;
    if (!seen[static_cast<std::size_t>(s)]) {
      seen[static_cast<std::size_t>(s)] = true;
      out.push_back(ServerId{s});
    }
  }
  return out;
}

}  // namespace midas::routing

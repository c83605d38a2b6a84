#pragma once

#include <cstdint>
#include <string_view>

namespace midas {

/// 64-bit avalanche mixer (splitmix64 finalizer). Used to post-process
/// FNV output and to derive RNG sub-stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over raw bytes, no finalizer.
std::uint64_t fnv1a64(std::string_view bytes);

/// Shard hash for namespace keys: FNV-1a 64 followed by the splitmix64
/// finalizer. The algorithm is fixed; golden values are frozen in tests
/// so any accidental change breaks loudly.
///
/// Throws std::invalid_argument on an empty path.
std::uint64_t hash_key(std::string_view path);

}  // namespace midas

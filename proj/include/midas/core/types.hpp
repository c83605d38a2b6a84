#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "midas/core/hash.hpp"
#include "midas/core/time.hpp"

namespace midas {

/// Index of a metadata server in [0, m). m is fixed for a run.
struct ServerId {
  int index = 0;

  friend bool operator==(ServerId a, ServerId b) { return a.index == b.index; }
  friend bool operator!=(ServerId a, ServerId b) { return a.index != b.index; }
  friend bool operator<(ServerId a, ServerId b) { return a.index < b.index; }
};

enum class OpKind : std::uint8_t {
  kLookup,
  kGetattr,
  kReaddir,
  kCreate,
  kStat,
  kUnlink,
  kOpen,
};

inline const char* op_kind_name(OpKind op) {
  switch (op) {
    case OpKind::kLookup: return "lookup";
    case OpKind::kGetattr: return "getattr";
    case OpKind::kReaddir: return "readdir";
    case OpKind::kCreate: return "create";
    case OpKind::kStat: return "stat";
    case OpKind::kUnlink: return "unlink";
    case OpKind::kOpen: return "open";
  }
  return "?";
}

/// create/unlink mutate namespace state; everything else is a read.
inline bool op_is_write(OpKind op) {
  return op == OpKind::kCreate || op == OpKind::kUnlink;
}

/// Safe-to-cache reads. open is read-only here but is kept out of the
/// cache (an open may carry session state the cache cannot stand in for).
inline bool op_is_cacheable(OpKind op) {
  switch (op) {
    case OpKind::kLookup:
    case OpKind::kGetattr:
    case OpKind::kReaddir:
    case OpKind::kStat:
      return true;
    default:
      return false;
  }
}

/// Namespace object identifier: path plus its shard hash. The shard is a
/// pure function of the path (see hash_key).
struct NamespaceKey {
  std::string path;
  std::uint64_t shard = 0;

  static NamespaceKey of(std::string_view path) {
    NamespaceKey k;
    k.path = std::string(path);
    k.shard = hash_key(path);
    return k;
  }
};

struct Request {
  std::int64_t id = 0;
  NamespaceKey key;
  OpKind op = OpKind::kLookup;
  MicroTime arrival = 0;  // client-side emission time
  bool is_write = false;
};

}  // namespace midas

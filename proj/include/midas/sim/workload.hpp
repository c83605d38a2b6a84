#pragma once

#include <optional>
#include <vector>

#include "midas/core/rng.hpp"
#include "midas/core/types.hpp"
#include "midas/sim/config.hpp"

namespace midas::sim {

/// Instantaneous arrival rate (req/s) of a pattern at offset `t` from the
/// stream start.
double rate_at(const WorkloadSpec& spec, MicroTime t);

/// Lazy deterministic request stream. Arrivals are a Poisson process
/// modulated by the pattern's rate function (Lewis-Shedler thinning),
/// keys are Zipf(s) over the universe (s = 0 degenerates to uniform),
/// writes are Bernoulli(write_fraction). Times are relative to the
/// stream start; ids count up from `id_base`.
class WorkloadStream {
 public:
  WorkloadStream(const WorkloadSpec& spec, Rng rng, std::int64_t id_base);

  std::optional<Request> next();

  /// Key path for a popularity rank (0 = hottest).
  static std::string key_path(std::int64_t rank, int dirs);

 private:
  std::int64_t draw_key_rank();
  OpKind draw_op(bool is_write);

  WorkloadSpec spec_;
  Rng rng_;
  std::int64_t next_id_;
  MicroTime t_ = 0;
  double rate_max_;
  std::vector<double> zipf_cdf_;  // empty when s == 0
};

}  // namespace midas::sim

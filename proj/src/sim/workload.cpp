#include "midas/sim/workload.hpp"

#include <algorithm>
#include <cmath>

namespace midas::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double rate_at(const WorkloadSpec& spec, MicroTime t) {
  double base = spec.base_rate_per_s;
  switch (spec.pattern) {
    case Pattern::kLight:
    case Pattern::kSkewedZipf:
      return base;
    case Pattern::kBursty: {
      MicroTime cycle = spec.burst_gap_us + spec.burst_len_us;
      MicroTime phase = t % cycle;
      // Bursts occupy the tail of each cycle: [gap, gap + len).
      return phase >= spec.burst_gap_us ? base * spec.burst_amplitude : base;
    }
    case Pattern::kPeriodic: {
      double x = static_cast<double>(t % spec.period_us) /
                 static_cast<double>(spec.period_us);
      return base * (1.0 + spec.depth * std::sin(2.0 * kPi * x));
    }
    case Pattern::kDiurnal: {
      // base is the peak rate; the day starts at the trough.
      double x = static_cast<double>(t % spec.day_us) /
                 static_cast<double>(spec.day_us);
      double shape = 0.5 * (1.0 - std::cos(2.0 * kPi * x));
      return base * (spec.trough_ratio + (1.0 - spec.trough_ratio) * shape);
    }
  }
  return base;
}

WorkloadStream::WorkloadStream(const WorkloadSpec& spec, Rng rng,
                               std::int64_t id_base)
    : spec_(spec), rng_(rng), next_id_(id_base) {
  switch (spec.pattern) {
    case Pattern::kBursty:
      rate_max_ = spec.base_rate_per_s * spec.burst_amplitude;
      break;
    case Pattern::kPeriodic:
      rate_max_ = spec.base_rate_per_s * (1.0 + spec.depth);
      break;
    default:
      rate_max_ = spec.base_rate_per_s;
      break;
  }
  if (spec.zipf_s > 0.0) {
    zipf_cdf_.resize(static_cast<std::size_t>(spec.key_universe));
    double acc = 0.0;
    for (std::int64_t k = 0; k < spec.key_universe; ++k) {
      acc += std::pow(static_cast<double>(k + 1), -spec.zipf_s);
      zipf_cdf_[static_cast<std::size_t>(k)] = acc;
    }
    for (auto& v : zipf_cdf_) v /= acc;
  }
}

std::string WorkloadStream::key_path(std::int64_t rank, int dirs) {
  return "/d" + std::to_string(rank % dirs) + "/o" + std::to_string(rank);
}

std::int64_t WorkloadStream::draw_key_rank() {
  if (zipf_cdf_.empty())
    return static_cast<std::int64_t>(
        rng_.uniform_below(static_cast<std::uint64_t>(spec_.key_universe)));
  double u = rng_.uniform01();
  auto it = std::lower_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
  if (it == zipf_cdf_.end()) it = std::prev(zipf_cdf_.end());
  return static_cast<std::int64_t>(it - zipf_cdf_.begin());
}

OpKind WorkloadStream::draw_op(bool is_write) {
  double u = rng_.uniform01();
  if (is_write) return u < 0.7 ? OpKind::kCreate : OpKind::kUnlink;
  if (u < 0.40) return OpKind::kLookup;
  if (u < 0.70) return OpKind::kGetattr;
  if (u < 0.85) return OpKind::kStat;
  if (u < 0.95) return OpKind::kReaddir;
  return OpKind::kOpen;
}

std::optional<Request> WorkloadStream::next() {
  // Lewis-Shedler thinning against the pattern's peak rate.
  while (true) {
    double gap_s = rng_.exponential(1.0 / rate_max_);
    MicroTime step = seconds_to_us(gap_s);
    if (step < 1) step = 1;
    t_ += step;
    if (t_ >= spec_.duration_us) return std::nullopt;
    double accept = rate_at(spec_, t_) / rate_max_;
    if (accept >= 1.0 || rng_.uniform01() < accept) break;
  }
  Request req;
  req.id = next_id_++;
  req.arrival = t_;
  req.is_write = rng_.uniform01() < spec_.write_fraction;
  req.op = draw_op(req.is_write);
  req.key = NamespaceKey::of(key_path(draw_key_rank(), spec_.dirs));
  return req;
}

}  // namespace midas::sim

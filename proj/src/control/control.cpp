#include "midas/control/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "midas/telemetry/telemetry.hpp"

namespace midas::control {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw std::runtime_error("median of empty sample");
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(),
                   v.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                   v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace

ControlTargets derive_targets(std::span<const double> b_samples,
                              std::vector<double> warmup_latencies_ms,
                              double rtt_ms, MicroTime warmup_us) {
  if (warmup_latencies_ms.empty())
    throw std::runtime_error(
        "warmup produced no completed requests; cannot derive targets");
  ControlTargets t;
  t.rtt_ms = rtt_ms;
  t.warmup_us = warmup_us;
  std::vector<double> b(b_samples.begin(), b_samples.end());
  t.b_tgt = (b.empty() ? 0.0 : median(std::move(b))) + 0.05;
  t.p99_warm_ms = telemetry::quantile_nearest_rank(warmup_latencies_ms, 0.99);
  t.p99_tgt_ms = std::max(t.p99_warm_ms * 1.25, rtt_ms + 2.0);
  return t;
}

double delta_v(double l_p, double l_j, int batch) {
  if (batch < 1) throw std::invalid_argument("delta_v: batch must be >= 1");
  double b = static_cast<double>(batch);
  return 2.0 * b * (l_j - l_p) + 2.0 * b * b;
}

Controller::Controller(const ControlDefaults& defaults, double rtt_ms)
    : defaults_(defaults) {
  knobs_.d = defaults.d0;
  knobs_.delta_l = defaults.delta_l0;
  delta_t_base_us_ = ms_to_us(rtt_ms);
  jitter_amp_us_ = ms_to_us(defaults.jitter_frac * rtt_ms);
  knobs_.delta_t_us = delta_t_base_us_;
  knobs_.f_max = std::min(defaults.f_max0, defaults.f_cap);
}

void Controller::fast_tick(double pressure, Rng& jitter_rng) {
  if (pressure > defaults_.h_up) {
    ++hysteresis_.above;
  } else {
    hysteresis_.above = 0;
  }
  if (pressure < defaults_.h_down) {
    ++hysteresis_.below;
  } else {
    hysteresis_.below = 0;
  }

  if (hysteresis_.above >= defaults_.k_up) {
    knobs_.d = std::min(knobs_.d + 1, 4);
    knobs_.delta_l = std::max(knobs_.delta_l - 1, defaults_.delta_l_min);
    if (defaults_.adapt_f_max)
      knobs_.f_max = std::min(knobs_.f_max + defaults_.f_cap / 4.0,
                              defaults_.f_cap);
    hysteresis_.above = 0;
    hysteresis_.below = 0;
    ++escalations_;
  } else if (hysteresis_.below >= defaults_.k_down) {
    knobs_.d = std::max(knobs_.d - 1, 1);
    knobs_.delta_l = std::min(knobs_.delta_l + 1, defaults_.delta_l_max);
    if (defaults_.adapt_f_max)
      knobs_.f_max = std::max(knobs_.f_max - defaults_.f_cap / 8.0,
                              defaults_.f_cap / 4.0);
    hysteresis_.above = 0;
    hysteresis_.below = 0;
    ++deescalations_;
  }

  // Fresh jitter every tick, centered on the base margin.
  MicroTime jitter = jitter_rng.uniform_int(-jitter_amp_us_, jitter_amp_us_);
  knobs_.delta_t_us = std::max<MicroTime>(1, delta_t_base_us_ + jitter);
}

}  // namespace midas::control

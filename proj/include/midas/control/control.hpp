#pragma once

#include <span>
#include <vector>

#include "midas/control/knobs.hpp"
#include "midas/core/rng.hpp"
#include "midas/core/time.hpp"

namespace midas::control {

/// All control-plane constants with their stock defaults. Everything is
/// configurable; the defaults are the canonical operating point.
struct ControlDefaults {
  MicroTime t_fast_us = 250 * kMicrosPerMilli;
  MicroTime t_slow_us = 30 * kMicrosPerSecond;
  int d0 = 2;
  int delta_l0 = 4;
  int delta_l_min = 2;
  int delta_l_max = 8;
  MicroTime pin_duration_us = 300 * kMicrosPerMilli;  // C
  double f_cap = 0.1;
  double f_max0 = 0.1;
  double h_down = 0.02;
  double h_up = 0.10;
  int k_up = 3;
  int k_down = 8;
  double w1 = 1.0;
  double w2 = 1.0;
  double eps = 1e-6;
  MicroTime reroute_window_us = kMicrosPerSecond;  // W
  double alpha_fast = 0.2;
  double alpha_slow = 0.1;
  double p_star = 1e-4;
  double gamma = 0.5;
  double jitter_frac = 0.1;  // delta_t jitter amplitude, fraction of RTT
  bool adapt_f_max = false;  // experimental; stock loop keeps f_max = f_cap
};

/// Targets derived from the low-utilization warmup window.
struct ControlTargets {
  double b_tgt = 0.05;
  double p99_tgt_ms = 3.0;
  double rtt_ms = 1.0;
  double p99_warm_ms = 0.0;
  MicroTime warmup_us = 0;
};

/// B_tgt = median_t B(t) + 0.05; P99_tgt = max(1.25 * p99_warm, RTT + 2ms).
/// Throws std::runtime_error when the warmup produced no completions.
ControlTargets derive_targets(std::span<const double> b_samples,
                              std::vector<double> warmup_latencies_ms,
                              double rtt_ms, MicroTime warmup_us);

struct HysteresisState {
  int above = 0;  // consecutive fast ticks with P > H_up
  int below = 0;  // consecutive fast ticks with P < H_down
};

/// Potential-function step for moving `batch` requests from a server at
/// load l_p to one at load l_j: 2*batch*(l_j - l_p) + 2*batch^2.
double delta_v(double l_p, double l_j, int batch);

/// The fast knob-adaptation loop. One instance per proxy; jitter draws
/// come from the proxy's own sub-stream so proxies avoid lockstep moves.
class Controller {
 public:
  Controller(const ControlDefaults& defaults, double rtt_ms);

  /// One fast tick with the current pressure score. Counter semantics:
  /// a counter resets on any tick that breaks its streak and after
  /// firing, and the two directions never fire together.
  void fast_tick(double pressure, Rng& jitter_rng);

  const ControlKnobs& knobs() const { return knobs_; }
  const HysteresisState& hysteresis() const { return hysteresis_; }
  int escalations() const { return escalations_; }
  int deescalations() const { return deescalations_; }

 private:
  ControlDefaults defaults_;
  ControlKnobs knobs_;
  HysteresisState hysteresis_;
  MicroTime delta_t_base_us_;
  MicroTime jitter_amp_us_;
  int escalations_ = 0;
  int deescalations_ = 0;
};

}  // namespace midas::control

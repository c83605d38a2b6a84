#pragma once

#include "midas/core/time.hpp"

namespace midas::control {

/// The mutable fast-loop tuning state. All bounds are re-clamped after
/// every update; changes happen in single bounded steps.
struct ControlKnobs {
  int d = 2;                     // sampling degree, in {1..4}
  int delta_l = 4;               // queue margin, in [delta_l_min, delta_l_max]
  MicroTime delta_t_us = 1000;   // latency margin, jittered each fast tick
  double f_max = 0.1;            // reroute cap, <= f_cap
};

}  // namespace midas::control

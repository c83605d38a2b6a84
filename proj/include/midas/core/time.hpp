#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace midas {

/// Simulated time in integer microseconds. All event ordering and
/// arithmetic happens on this type; milliseconds appear only at the
/// reporting/config boundary.
using MicroTime = std::int64_t;

constexpr MicroTime kMicrosPerMilli = 1000;
constexpr MicroTime kMicrosPerSecond = 1000000;

inline MicroTime ms_to_us(double ms) {
  return static_cast<MicroTime>(std::llround(ms * 1000.0));
}

inline double us_to_ms(MicroTime us) { return static_cast<double>(us) / 1000.0; }

inline MicroTime seconds_to_us(double s) {
  return static_cast<MicroTime>(std::llround(s * 1.0e6));
}

/// Monotone simulated clock. Advancing backwards is an engine bug and
/// throws rather than silently corrupting event order.
class SimClock {
 public:
  MicroTime now() const { return now_; }

  void advance_to(MicroTime t) {
    if (t < now_) throw std::logic_error("SimClock: time moved backwards");
    now_ = t;
  }

 private:
  MicroTime now_ = 0;
};

}  // namespace midas

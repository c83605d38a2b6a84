#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

#include "midas/core/time.hpp"

namespace midas::telemetry {

/// Raised when a statistic is requested from an empty sample window.
/// Callers treat the server as unmeasured and keep it routable only as
/// a consistent-hash primary.
class NoDataError : public std::runtime_error {
 public:
  NoDataError() : std::runtime_error("no samples in window") {}
};

/// x' = (1 - alpha) * prev + alpha * sample, alpha in (0, 1].
double ewma_update(double prev, double sample, double alpha);

/// Exact nearest-rank order statistic: rank = ceil(q * n), 1-based.
/// q must be in (0, 1); throws NoDataError on an empty window.
double quantile_nearest_rank(std::span<const double> window, double q);

/// Population std of the smoothed queue lengths divided by (mean + eps).
double imbalance(std::span<const double> lhat, double eps);

struct PressureInputs {
  double b = 0.0;
  double b_tgt = 0.0;
  double p99_ms = 0.0;
  double p99_tgt_ms = 1.0;
  double w1 = 1.0;
  double w2 = 1.0;
};

/// Hinge pressure score. The latency hinge is normalized to
/// [p99/p99_tgt - 1]+ so both terms are dimensionless and the unit
/// weights w1 = w2 = 1 are meaningful.
double pressure(const PressureInputs& in);

/// Bounded FIFO of recent request latencies (milliseconds).
class LatencyWindow {
 public:
  explicit LatencyWindow(std::size_t capacity = 1024) : capacity_(capacity) {}

  void push(double latency_ms) {
    if (samples_.size() == capacity_) samples_.pop_front();
    samples_.push_back(latency_ms);
  }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }

  double quantile(double q) const;

 private:
  std::size_t capacity_;
  std::deque<double> samples_;
};

/// Live per-server observation state, smoothed at every fast tick.
struct ServerStats {
  int raw_queue = 0;          // waiting + in service, updated by the engine
  double lhat = 0.0;          // EWMA of raw_queue
  LatencyWindow window;       // recent end-to-end latencies, ms
  double p50_ms = 0.0;        // nearest-rank over window, last tick
  double p99_ms = 0.0;
  double ewma_p50_ms = 0.0;
  double ewma_p99_ms = 0.0;
  bool has_latency = false;   // false until the first non-empty window

  /// Smooth queue length and latency quantiles with the fast-loop alpha.
  void tick(double alpha);
};

/// Immutable per-tick view handed to routers and the controller. Routers
/// always read the snapshot of the last tick, never live values, which
/// bounds staleness by one fast interval.
struct TelemetrySnapshot {
  struct Row {
    double lhat = 0.0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    bool measured = false;  // latency data exists; steering may target it
  };

  MicroTime time = 0;
  std::vector<Row> rows;

  MicroTime staleness(MicroTime now) const { return now - time; }
};

TelemetrySnapshot make_snapshot(std::span<const ServerStats> servers,
                                MicroTime now);

}  // namespace midas::telemetry

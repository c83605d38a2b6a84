#include "midas/telemetry/telemetry.hpp"

#include <algorithm>
#include <cmath>

namespace midas::telemetry {

double ewma_update(double prev, double sample, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("ewma_update: alpha must be in (0, 1]");
  return (1.0 - alpha) * prev + alpha * sample;
}

double quantile_nearest_rank(std::span<const double> window, double q) {
  if (window.empty()) throw NoDataError();
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("quantile: q must be in (0, 1)");
  std::vector<double> sorted(window.begin(), window.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

double imbalance(std::span<const double> lhat, double eps) {
  if (lhat.empty()) throw std::invalid_argument("imbalance: no servers");
  if (!(eps > 0.0)) throw std::invalid_argument("imbalance: eps must be > 0");
  double mean = 0.0;
  for (double v : lhat) mean += v;
  mean /= static_cast<double>(lhat.size());
  double var = 0.0;
  for (double v : lhat) var += (v - mean) * (v - mean);
  var /= static_cast<double>(lhat.size());
  return std::sqrt(var) / (mean + eps);
}

double pressure(const PressureInputs& in) {
  if (!(in.w1 > 0.0) || !(in.w2 > 0.0))
    throw std::invalid_argument("pressure: weights must be > 0");
  if (!(in.p99_tgt_ms > 0.0))
    throw std::invalid_argument("pressure: p99 target must be > 0");
  double b_excess = std::max(in.b - in.b_tgt, 0.0);
  double lat_excess = std::max(in.p99_ms / in.p99_tgt_ms - 1.0, 0.0);
  return in.w1 * b_excess + in.w2 * lat_excess;
}

double LatencyWindow::quantile(double q) const {
  std::vector<double> copy(samples_.begin(), samples_.end());
  return quantile_nearest_rank(copy, q);
}

void ServerStats::tick(double alpha) {
  lhat = ewma_update(lhat, static_cast<double>(raw_queue), alpha);
  if (!window.empty()) {
    p50_ms = window.quantile(0.5);
    p99_ms = window.quantile(0.99);
    if (!has_latency) {
      // First measurement seeds the EWMAs directly instead of pulling
      // them up from zero.
      ewma_p50_ms = p50_ms;
      ewma_p99_ms = p99_ms;
      has_latency = true;
    } else {
      ewma_p50_ms = ewma_update(ewma_p50_ms, p50_ms, alpha);
      ewma_p99_ms = ewma_update(ewma_p99_ms, p99_ms, alpha);
    }
  }
}

TelemetrySnapshot make_snapshot(std::span<const ServerStats> servers,
                                MicroTime now) {
  TelemetrySnapshot snap;
  snap.time = now;
  snap.rows.reserve(servers.size());
  for (const auto& s : servers) {
    TelemetrySnapshot::Row r;
    r.lhat = s.lhat;
    r.p50_ms = s.ewma_p50_ms;
    r.p99_ms = s.ewma_p99_ms;
    r.measured = s.has_latency;
    snap.rows.push_back(r);
  }
  return snap;
}

}  // namespace midas::telemetry

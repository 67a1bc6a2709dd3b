#pragma once

// Distribution and trajectory similarity metrics.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

// Central differences of the speed channel; one-sided at the two ends.
inline std::vector<double> acceleration_series(std::span<const Pose> track) {
  if (track.size() < 3) throw InsufficientDataError("acceleration_series needs at least 3 poses");
  const std::size_t n = track.size();
  std::vector<double> acc(n);
  acc[0] = (track[1].speed - track[0].speed) / (track[1].t - track[0].t);
  for (std::size_t i = 1; i + 1 < n; ++i)
    acc[i] = (track[i + 1].speed - track[i - 1].speed) / (track[i + 1].t - track[i - 1].t);
  acc[n - 1] = (track[n - 1].speed - track[n - 2].speed) / (track[n - 1].t - track[n - 2].t);
  return acc;
}

struct HistogramSpec {
  double lo = -8.0;
  double hi = 8.0;
  int bins = 50;
  double smoothing = 1e-6;
};

// Normalized histogram; values outside [lo, hi] fall into the edge bins.
inline std::vector<double> smoothed_histogram(std::span<const double> sample, const HistogramSpec& spec) {
  if (sample.empty()) throw InsufficientDataError("empty sample");
  if (spec.bins < 1 || !(spec.hi > spec.lo)) throw ConfigError("invalid histogram spec");
  std::vector<double> h(static_cast<std::size_t>(spec.bins), 0.0);
  const double width = (spec.hi - spec.lo) / spec.bins;
  for (double v : sample) {
    long b = static_cast<long>(std::floor((v - spec.lo) / width));
    b = std::clamp<long>(b, 0, spec.bins - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  double total = 0.0;
  for (auto& c : h) {
    c = c / static_cast<double>(sample.size()) + spec.smoothing;
    total += c;
  }
  for (auto& c : h) c /= total;
  return h;
}

inline double kl_divergence(std::span<const double> sample_p, std::span<const double> sample_q,
                            const HistogramSpec& spec = {}) {
  const auto p = smoothed_histogram(sample_p, spec);
  const auto q = smoothed_histogram(sample_q, spec);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

// Exact empirical W1: integral of |F_p - F_q| over the merged support.
inline double wasserstein_1d(std::span<const double> sample_p, std::span<const double> sample_q) {
  if (sample_p.empty() || sample_q.empty()) throw InsufficientDataError("empty sample");
  std::vector<double> a(sample_p.begin(), sample_p.end());
  std::vector<double> b(sample_q.begin(), sample_q.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double next;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      next = a[i];
    else
      next = b[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
    prev = next;
  }
  return total;
}

namespace metrics_detail {
inline void require_polyline(std::span<const Vec2> line) {
  if (line.size() < 2) throw InsufficientDataError("degenerate polyline: fewer than 2 vertices");
}
inline double mean_distance_to(std::span<const Vec2> from, std::span<const Vec2> to) {
  double sum = 0.0;
  for (const auto& p : from) sum += point_to_polyline_distance(p, to);
  return sum / static_cast<double>(from.size());
}
inline double max_distance_to(std::span<const Vec2> from, std::span<const Vec2> to) {
  double m = 0.0;
  for (const auto& p : from) m = std::max(m, point_to_polyline_distance(p, to));
  return m;
}
}  // namespace metrics_detail

// Symmetric segment-path distance over vertex-to-path distances.
inline double sspd(std::span<const Vec2> a, std::span<const Vec2> b) {
  metrics_detail::require_polyline(a);
  metrics_detail::require_polyline(b);
  return 0.5 * (metrics_detail::mean_distance_to(a, b) + metrics_detail::mean_distance_to(b, a));
}

inline double hausdorff(std::span<const Vec2> a, std::span<const Vec2> b) {
  metrics_detail::require_polyline(a);
  metrics_detail::require_polyline(b);
  return std::max(metrics_detail::max_distance_to(a, b), metrics_detail::max_distance_to(b, a));
}

}  // namespace advsim

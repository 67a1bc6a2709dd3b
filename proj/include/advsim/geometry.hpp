#pragma once

// Oriented-box overlap, trajectory-pair collision, and polyline distance primitives.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "advsim/error.hpp"
#include "advsim/scenario.hpp"
#include "advsim/vec2.hpp"

namespace advsim {

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 4.8;
  double width = 2.0;
};

struct BoxDims {
  double length = 4.8;
  double width = 2.0;
};

inline OrientedBox box_at(const Pose& p, BoxDims dims) { return {p.position(), p.heading, dims.length, dims.width}; }

// Separating-axis test over the four edge normals. Closed rectangles: touching counts as overlap.
inline bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 a_axes[2] = {unit_from_heading(a.heading), unit_from_heading(a.heading + std::numbers::pi / 2)};
  const Vec2 b_axes[2] = {unit_from_heading(b.heading), unit_from_heading(b.heading + std::numbers::pi / 2)};
  const double a_half[2] = {0.5 * a.length, 0.5 * a.width};
  const double b_half[2] = {0.5 * b.length, 0.5 * b.width};
  const Vec2 d = b.center - a.center;

  auto separated_on = [&](Vec2 n) {
    const double ra = a_half[0] * std::abs(dot(a_axes[0], n)) + a_half[1] * std::abs(dot(a_axes[1], n));
    const double rb = b_half[0] * std::abs(dot(b_axes[0], n)) + b_half[1] * std::abs(dot(b_axes[1], n));
    return std::abs(dot(d, n)) > ra + rb;
  };
  for (const Vec2& n : a_axes)
    if (separated_on(n)) return false;
  for (const Vec2& n : b_axes)
    if (separated_on(n)) return false;
  return true;
}

struct CollisionReport {
  bool occurred = false;
  std::optional<double> time;
  std::optional<double> relative_speed;
  bool operator==(const CollisionReport&) const = default;
};

namespace geometry_detail {

// Grid spacing of a pose sequence; nullopt when it has a single pose. Throws on non-uniform spacing.
inline std::optional<double> sequence_dt(std::span<const Pose> poses) {
  if (poses.size() < 2) return std::nullopt;
  const double dt = poses[1].t - poses[0].t;
  if (!(dt > 0.0)) throw GridError("pose times not increasing");
  for (std::size_t i = 2; i < poses.size(); ++i)
    if (std::abs(poses[i].t - poses[i - 1].t - dt) > kTimeEps * std::max(1.0, dt) * 10)
      throw GridError("non-uniform pose spacing");
  return dt;
}

// Aligned index ranges of the two sequences over their common timestamps.
struct Alignment {
  std::size_t a_first = 0;
  std::size_t b_first = 0;
  std::size_t count = 0;
};

inline Alignment align(std::span<const Pose> a, std::span<const Pose> b) {
  if (a.empty() || b.empty()) throw GridError("empty pose sequence");
  const auto da = sequence_dt(a);
  const auto db = sequence_dt(b);
  double dt = 0.0;
  if (da && db) {
    if (std::abs(*da - *db) > kTimeEps) throw GridError("time steps differ");
    dt = *da;
  } else if (da || db) {
    dt = da ? *da : *db;
  }
  if (dt == 0.0) {
    if (std::abs(a[0].t - b[0].t) > kTimeEps) throw GridError("no common timestamps");
    return {0, 0, 1};
  }
  const double shift = (b[0].t - a[0].t) / dt;
  const long k = std::lround(shift);
  if (std::abs(shift - static_cast<double>(k)) > 1e-6) throw GridError("time grids are offset");
  Alignment al;
  if (k >= 0) {
    al.a_first = static_cast<std::size_t>(k);
    al.b_first = 0;
  } else {
    al.a_first = 0;
    al.b_first = static_cast<std::size_t>(-k);
  }
  if (al.a_first >= a.size() || al.b_first >= b.size()) throw GridError("no common timestamps");
  al.count = std::min(a.size() - al.a_first, b.size() - al.b_first);
  return al;
}

}  // namespace geometry_detail

// Earliest common timestamp at which the two agents' boxes overlap.
inline CollisionReport trajectory_collision(std::span<const Pose> a, std::span<const Pose> b, BoxDims box_a,
                                            BoxDims box_b) {
  const auto al = geometry_detail::align(a, b);
  for (std::size_t i = 0; i < al.count; ++i) {
    const Pose& pa = a[al.a_first + i];
    const Pose& pb = b[al.b_first + i];
    if (boxes_intersect(box_at(pa, box_a), box_at(pb, box_b)))
      return {true, pa.t, (pa.velocity() - pb.velocity()).norm()};
  }
  return {};
}

inline CollisionReport trajectory_collision(const TrajectoryHypothesis& a, const TrajectoryHypothesis& b, BoxDims box_a,
                                            BoxDims box_b) {
  return trajectory_collision(std::span<const Pose>(a.poses), std::span<const Pose>(b.poses), box_a, box_b);
}

// Number of common timestamps with overlapping boxes.
inline int count_overlaps(std::span<const Pose> a, std::span<const Pose> b, BoxDims box_a, BoxDims box_b) {
  const auto al = geometry_detail::align(a, b);
  int n = 0;
  for (std::size_t i = 0; i < al.count; ++i)
    if (boxes_intersect(box_at(a[al.a_first + i], box_a), box_at(b[al.b_first + i], box_b))) ++n;
  return n;
}

inline double point_to_polyline_distance(Vec2 p, std::span<const Vec2> line) {
  if (line.empty()) throw ValidationError("empty polyline");
  if (line.size() == 1) return distance(p, line[0]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

struct PathProjection {
  double s = 0.0;        // arc length of the foot point, extrapolated past the ends
  double lateral = 0.0;  // signed offset, positive to the left of travel
  double distance = 0.0;
  double heading = 0.0;  // tangent heading at the foot point
};

// Polyline with cumulative arc length for projections and lookups along it.
class ArcLengthPath {
 public:
  ArcLengthPath() = default;
  explicit ArcLengthPath(Polyline pts) : pts_(std::move(pts)) {
    if (pts_.size() < 2) throw ValidationError("path needs at least 2 points");
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + distance(pts_[i], pts_[i - 1]);
  }

  const Polyline& points() const { return pts_; }
  double length() const { return cum_.back(); }

  PathProjection project(Vec2 p) const {
    PathProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    const std::size_t last = pts_.size() - 2;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Vec2 a = pts_[i];
      const Vec2 ab = pts_[i + 1] - a;
      const double len = cum_[i + 1] - cum_[i];
      if (len == 0.0) continue;
      const Vec2 u = ab * (1.0 / len);
      double along = dot(p - a, u);
      // Only the end segments may extrapolate.
      const double lo = (i == 0) ? -INFINITY : 0.0;
      const double hi = (i == last) ? INFINITY : len;
      const double clamped = std::clamp(along, lo, hi);
      const Vec2 foot = a + u * clamped;
      const double d = distance(p, foot);
      if (d < best.distance) {
        best.distance = d;
        best.s = cum_[i] + clamped;
        best.lateral = cross(u, p - a);
        best.heading = std::atan2(u.y, u.x);
      }
    }
    return best;
  }

  // Position at arc length `s`, extrapolating linearly beyond either end.
  Vec2 point_at(double s) const {
    const std::size_t i = segment_for(s);
    const Vec2 a = pts_[i];
    const Vec2 ab = pts_[i + 1] - a;
    const double len = cum_[i + 1] - cum_[i];
    return a + ab * ((s - cum_[i]) / len);
  }

  double heading_at(double s) const {
    const std::size_t i = segment_for(s);
    const Vec2 ab = pts_[i + 1] - pts_[i];
    return std::atan2(ab.y, ab.x);
  }

 private:
  std::size_t segment_for(double s) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = (it == cum_.begin()) ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
    if (i > pts_.size() - 2) i = pts_.size() - 2;
    while (i > 0 && cum_[i + 1] - cum_[i] == 0.0) --i;
    return i;
  }

  Polyline pts_;
  std::vector<double> cum_;
};

// Drops consecutive points closer than `tol`.
inline Polyline dedupe_polyline(std::span<const Vec2> pts, double tol = 1e-6) {
  Polyline out;
  for (const auto& p : pts)
    if (out.empty() || distance(out.back(), p) > tol) out.push_back(p);
  return out;
}

inline Polyline positions_of(std::span<const Pose> poses) {
  Polyline out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.position());
  return out;
}

}  // namespace advsim

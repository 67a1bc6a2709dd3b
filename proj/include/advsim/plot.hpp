#pragma once

// Static SVG overhead plot of one episode: lanes, logged and simulated ego/opponent paths.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "advsim/engine.hpp"
#include "advsim/report_io.hpp"

namespace advsim {

namespace plot_detail {

struct Frame {
  double x0 = 0.0, y0 = 0.0, scale = 1.0, height = 0.0;
  double px(double x) const { return (x - x0) * scale; }
  double py(double y) const { return height - (y - y0) * scale; }
};

inline void polyline(std::ostringstream& out, const Frame& f, const std::vector<Vec2>& pts, const char* color,
                     double width, const char* dash = nullptr) {
  if (pts.size() < 2) return;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
  if (dash) out << " stroke-dasharray=\"" << dash << "\"";
  out << " points=\"";
  for (const auto& p : pts) out << format_double(std::round(f.px(p.x) * 100) / 100) << ',' << format_double(std::round(f.py(p.y) * 100) / 100) << ' ';
  out << "\"/>\n";
}

}  // namespace plot_detail

// Only the region around the ego and opponent is drawn; lanes are clipped to it by the viewBox.
inline std::string episode_svg(const Scenario& s, const EpisodeResult& r, double pixels = 800.0) {
  using namespace plot_detail;
  std::vector<Vec2> pts;
  auto collect = [&](const std::vector<Pose>& poses) {
    for (const auto& p : poses) pts.push_back(p.position());
  };
  collect(r.ego_track);
  collect(r.opponent_track);
  collect(s.ego().states);
  if (const AgentTrack* ov = s.find_track(r.opponent_id)) collect(ov->states);
  if (pts.empty()) pts.push_back({0.0, 0.0});
  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double margin = 10.0;
  xmin -= margin, xmax += margin, ymin -= margin, ymax += margin;
  const double span = std::max(xmax - xmin, ymax - ymin);
  Frame f{xmin, ymin, pixels / span, (ymax - ymin) * pixels / span};
  const double width = (xmax - xmin) * f.scale;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(std::round(width)) << "\" height=\""
      << format_double(std::round(f.height)) << "\" viewBox=\"0 0 " << format_double(std::round(width)) << ' '
      << format_double(std::round(f.height)) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& lane : s.map.lane_centerlines) polyline(out, f, lane, "#cccccc", 1.0, "6,4");

  polyline(out, f, positions_of(s.ego().states), "#1f77b4", 1.5, "3,3");
  if (const AgentTrack* ov = s.find_track(r.opponent_id)) polyline(out, f, positions_of(ov->states), "#d62728", 1.5, "3,3");
  polyline(out, f, positions_of(r.ego_track), "#1f77b4", 2.5);
  polyline(out, f, positions_of(r.opponent_track), "#d62728", 2.5);

  if (r.collision.report.occurred && !r.ego_track.empty()) {
    const Vec2 c = r.ego_track.back().position();
    out << "<circle cx=\"" << format_double(std::round(f.px(c.x) * 100) / 100) << "\" cy=\""
        << format_double(std::round(f.py(c.y) * 100) / 100) << "\" r=\"8\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  out << "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"13\">" << r.scenario_id << "  opponent "
      << r.opponent_id << "  " << r.end_reason << "</text>\n";
  out << "<text x=\"8\" y=\"34\" font-family=\"monospace\" font-size=\"11\" fill=\"#555\">"
      << "dashed: log, solid: simulated; blue: ego, red: opponent</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace advsim

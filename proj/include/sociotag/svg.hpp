#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "sociotag/analysis.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

/// Static line chart of a rewiring sweep: observed value (red) against the
/// rewired mean (blue) with a ±1 std band.
inline std::string sweep_svg(const std::vector<SweepPoint>& pts, const std::string& title = "") {
  constexpr double W = 480, H = 320, L = 60, R = 20, T = 30, B = 40;
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" viewBox=\"0 0 %g %g\">\n", W, H,
                W, H);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (pts.empty()) return s + "</svg>\n";

  double lo = pts[0].observed, hi = pts[0].observed;
  for (const auto& p : pts) {
    lo = std::min({lo, p.observed, p.mean - p.stddev});
    hi = std::max({hi, p.observed, p.mean + p.stddev});
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double x0 = pts.front().epoch, x1 = std::max<double>(pts.back().epoch, x0 + 1);
  const auto X = [&](double e) { return L + (e - x0) / (x1 - x0) * (W - L - R); };
  const auto Y = [&](double v) { return H - B - (v - lo) / (hi - lo) * (H - T - B); };

  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                L, H - B, W - R, H - B, L, T, L, H - B);
  s += buf;

  std::string band = "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(p.epoch), Y(p.mean + p.stddev));
    band += buf;
  }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(it->epoch), Y(it->mean - it->stddev));
    band += buf;
  }
  s += band + "\"/>\n";

  const auto polyline = [&](auto value, const char* color) {
    std::string line = "<polyline fill=\"none\" stroke=\"";
    line += color;
    line += "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(p.epoch), Y(value(p)));
      line += buf;
    }
    return line + "\"/>\n";
  };
  s += polyline([](const SweepPoint& p) { return p.mean; }, "#3182bd");
  s += polyline([](const SweepPoint& p) { return p.observed; }, "#de2d26");

  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\">rewiring epochs</text>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\">%.4g</text>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\">%.4g</text>\n",
                (L + W - R) / 2, H - 8, L - 4, H - B, lo, L - 4, T + 4, hi);
  s += buf;
  if (!title.empty()) {
    s += "<text x=\"" + std::to_string(W / 2) + "\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">" + title +
         "</text>\n";
  }
  return s + "</svg>\n";
}

inline void write_sweep_svg(const std::vector<SweepPoint>& pts, const std::string& path, const std::string& title = "") {
  auto out = text::open_output(path);
  out << sweep_svg(pts, title);
}

}  // namespace sociotag

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamshock/effects.hpp"
#include "teamshock/timeseries.hpp"

namespace teamshock {

namespace detail::svg {

inline std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Linear map from data to plot coordinates on a fixed 640x360 canvas.
struct Frame {
  double x0, x1, y0, y1;
  static constexpr double left = 60, right = 620, top = 40, bottom = 320;

  double px(double x) const { return x1 == x0 ? (left + right) / 2 : left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return y1 == y0 ? (top + bottom) / 2 : bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

inline Frame frame(double x0, double x1, double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(1.0, std::abs(lo) * 0.1);
    lo -= pad;
    hi += pad;
  }
  const double pad = (hi - lo) * 0.05;
  return {x0, x1, lo - pad, hi + pad};
}

inline void open(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\" "
       "font-family=\"DejaVu Sans, sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"640\" height=\"360\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
}

inline void axes(std::ostringstream& o, const Frame& f, const std::string& x_lo, const std::string& x_hi) {
  o << "<line x1=\"" << f2(Frame::left) << "\" y1=\"" << f2(Frame::bottom) << "\" x2=\"" << f2(Frame::right) << "\" y2=\""
    << f2(Frame::bottom) << "\" stroke=\"#333333\"/>\n";
  o << "<line x1=\"" << f2(Frame::left) << "\" y1=\"" << f2(Frame::top) << "\" x2=\"" << f2(Frame::left) << "\" y2=\""
    << f2(Frame::bottom) << "\" stroke=\"#333333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.y0 + (f.y1 - f.y0) * k / 4.0;
    o << "<text x=\"" << f2(Frame::left - 6) << "\" y=\"" << f2(f.py(v) + 4) << "\" text-anchor=\"end\">"
      << escape(f2(v)) << "</text>\n";
  }
  o << "<text x=\"" << f2(Frame::left) << "\" y=\"" << f2(Frame::bottom + 16) << "\">" << escape(x_lo) << "</text>\n";
  o << "<text x=\"" << f2(Frame::right) << "\" y=\"" << f2(Frame::bottom + 16) << "\" text-anchor=\"end\">"
    << escape(x_hi) << "</text>\n";
}

inline std::string polyline(const Frame& f, std::span<const double> y, double x_offset, const std::string& style) {
  std::string s = "<polyline fill=\"none\" " + style + " points=\"";
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) s += ' ';
    s += f2(f.px(x_offset + static_cast<double>(i))) + "," + f2(f.py(y[i]));
  }
  return s + "\"/>\n";
}

inline std::string band(const Frame& f, std::span<const double> lo, std::span<const double> hi, double x_offset,
                        const std::string& fill) {
  std::string s = "<polygon fill=\"" + fill + "\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < hi.size(); ++i) s += f2(f.px(x_offset + static_cast<double>(i))) + "," + f2(f.py(hi[i])) + " ";
  for (std::size_t i = lo.size(); i-- > 0;) {
    s += f2(f.px(x_offset + static_cast<double>(i))) + "," + f2(f.py(lo[i]));
    if (i) s += ' ';
  }
  return s + "\"/>\n";
}

}  // namespace detail::svg

/// History, forecast point line, 95% (light) and 80% (dark) bands, and the
/// observed post-boundary values when given.
inline std::string render_forecast_svg(const MonthlySeries& history, const Forecast& fc,
                                       std::span<const double> observed_after, const std::string& title) {
  using namespace detail::svg;
  if (history.values.empty()) throw std::invalid_argument("plot: empty series");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto take = [&](std::span<const double> v) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  };
  take(history.values);
  take(fc.point);
  for (const auto& b : fc.bands) {
    take(b.lower);
    take(b.upper);
  }
  take(observed_after);
  const double n_hist = static_cast<double>(history.values.size());
  const Frame f = frame(0, n_hist + fc.horizon - 1, lo, hi);
  std::ostringstream o;
  open(o, title);
  axes(o, f, history.start.str(), (fc.start + (fc.horizon - 1)).str());
  const char* fills[] = {"#c6dbef", "#4292c6"};  // wider band first, lighter
  for (std::size_t k = fc.bands.size(); k-- > 0;) {
    const std::size_t shade = k == fc.bands.size() - 1 ? 0 : 1;
    o << band(f, fc.bands[k].lower, fc.bands[k].upper, n_hist, fills[shade]);
  }
  o << polyline(f, history.values, 0, "stroke=\"#000000\" stroke-width=\"1.5\"");
  o << polyline(f, fc.point, n_hist, "stroke=\"#08306b\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"");
  if (!observed_after.empty()) o << polyline(f, observed_after, n_hist, "stroke=\"#cb181d\" stroke-width=\"1.5\"");
  o << "</svg>\n";
  return o.str();
}

/// Line plot of one monthly series; a single point is drawn as a marker.
inline std::string render_series_svg(const MonthlySeries& s, const std::string& title) {
  using namespace detail::svg;
  if (s.values.empty()) throw std::invalid_argument("plot: empty series");
  const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
  const Frame f = frame(0, static_cast<double>(s.values.size() - 1), *mn, *mx);
  std::ostringstream o;
  open(o, title);
  axes(o, f, s.start.str(), s.month_at(s.values.size() - 1).str());
  if (s.values.size() == 1)
    o << "<circle cx=\"" << f2(f.px(0)) << "\" cy=\"" << f2(f.py(s.values[0])) << "\" r=\"3\" fill=\"#000000\"/>\n";
  else
    o << polyline(f, s.values, 0, "stroke=\"#000000\" stroke-width=\"1.5\"");
  o << "</svg>\n";
  return o.str();
}

/// Per-month box pairs: test residuals (grey) beside target effects (blue).
inline std::string render_distribution_svg(std::span<const DistributionReport> reports, const std::string& title) {
  using namespace detail::svg;
  if (reports.empty()) throw std::invalid_argument("plot: no distributions");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : reports)
    for (const auto* s : {&r.residuals, &r.effects}) {
      lo = std::min(lo, s->min);
      hi = std::max(hi, s->max);
    }
  const Frame f = frame(-0.5, static_cast<double>(reports.size()) - 0.5, lo, hi);
  std::ostringstream o;
  open(o, title);
  axes(o, f, "month " + std::to_string(reports.front().month), "month " + std::to_string(reports.back().month));
  o << "<line x1=\"" << f2(Frame::left) << "\" y1=\"" << f2(f.py(0)) << "\" x2=\"" << f2(Frame::right) << "\" y2=\""
    << f2(f.py(0)) << "\" stroke=\"#999999\" stroke-dasharray=\"2 2\"/>\n";
  const double slot = (Frame::right - Frame::left) / static_cast<double>(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (int g = 0; g < 2; ++g) {
      const auto& s = g == 0 ? reports[i].residuals : reports[i].effects;
      const double cx = f.px(static_cast<double>(i)) + (g == 0 ? -0.18 : 0.18) * slot;
      const double w = 0.14 * slot;
      const char* fill = g == 0 ? "#bdbdbd" : "#6baed6";
      o << "<line x1=\"" << f2(cx) << "\" y1=\"" << f2(f.py(s.min)) << "\" x2=\"" << f2(cx) << "\" y2=\"" << f2(f.py(s.max))
        << "\" stroke=\"#333333\"/>\n";
      o << "<rect x=\"" << f2(cx - w / 2) << "\" y=\"" << f2(f.py(s.q3)) << "\" width=\"" << f2(w) << "\" height=\""
        << f2(f.py(s.q1) - f.py(s.q3)) << "\" fill=\"" << fill << "\" stroke=\"#333333\"/>\n";
      o << "<line x1=\"" << f2(cx - w / 2) << "\" y1=\"" << f2(f.py(s.median)) << "\" x2=\"" << f2(cx + w / 2) << "\" y2=\""
        << f2(f.py(s.median)) << "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace teamshock

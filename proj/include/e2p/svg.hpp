#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "e2p/error.hpp"

namespace e2p {

/// Minimal SVG line/bar chart writer for result plots; no dependencies.
class SvgChart {
 public:
  SvgChart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_line(std::string name, std::vector<double> xs, std::vector<double> ys) {
    require(xs.size() == ys.size() && !xs.empty(), ErrorCategory::InvalidArgument,
            "series size mismatch");
    series_.push_back({std::move(name), std::move(xs), std::move(ys), false});
  }

  void add_bars(std::string name, std::vector<double> xs, std::vector<double> ys) {
    require(xs.size() == ys.size() && !xs.empty(), ErrorCategory::InvalidArgument,
            "series size mismatch");
    series_.push_back({std::move(name), std::move(xs), std::move(ys), true});
  }

  void write(const std::string& path) const {
    require(!series_.empty(), ErrorCategory::InvalidArgument, "no series to plot");
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& s : series_)
      for (size_t i = 0; i < s.xs.size(); ++i) {
        x_lo = std::min(x_lo, s.xs[i]);
        x_hi = std::max(x_hi, s.xs[i]);
        y_lo = std::min(y_lo, s.ys[i]);
        y_hi = std::max(y_hi, s.ys[i]);
      }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    y_lo = std::min(y_lo, 0.0);

    const double W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ofstream os(path);
    require(bool(os), ErrorCategory::IoFailure, "cannot open " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title_
       << "</text>\n";
    os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    for (int k = 0; k <= 4; ++k) {
      double fy = y_lo + (y_hi - y_lo) * k / 4.0;
      double fx = x_lo + (x_hi - x_lo) * k / 4.0;
      os << "<text x='" << ml - 8 << "' y='" << py(fy) + 4
         << "' text-anchor='end' font-size='11'>" << format(fy) << "</text>\n";
      os << "<text x='" << px(fx) << "' y='" << H - mb + 16
         << "' text-anchor='middle' font-size='11'>" << format(fx) << "</text>\n";
    }
    os << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='13'>"
       << x_label_ << "</text>\n";
    os << "<text x='16' y='" << H / 2 << "' font-size='13' transform='rotate(-90 16 " << H / 2
       << ")' text-anchor='middle'>" << y_label_ << "</text>\n";

    for (size_t si = 0; si < series_.size(); ++si) {
      const auto& s = series_[si];
      const char* color = colors[si % 5];
      if (s.bars) {
        double bw = (W - ml - mr) / double(s.xs.size()) * 0.6;
        for (size_t i = 0; i < s.xs.size(); ++i)
          os << "<rect x='" << px(s.xs[i]) - bw / 2 << "' y='" << py(s.ys[i]) << "' width='" << bw
             << "' height='" << py(0.0) - py(s.ys[i]) << "' fill='" << color << "'/>\n";
      } else {
        os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (size_t i = 0; i < s.xs.size(); ++i) os << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
        os << "'/>\n";
      }
      os << "<text x='" << W - mr - 4 << "' y='" << mt + 16 * double(si + 1)
         << "' text-anchor='end' font-size='12' fill='" << color << "'>" << s.name
         << "</text>\n";
    }
    os << "</svg>\n";
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
    bool bars = false;
  };

  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace e2p

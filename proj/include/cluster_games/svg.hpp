#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace cluster_games {

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

struct SvgChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace detail

/// Emits a static line chart. With log_y the vertical axis is log10-scaled
/// with decade ticks; nonpositive values are floored at 1e-16.
inline void write_line_chart(std::ostream& os,
                             const std::vector<SvgSeries>& series,
                             const SvgChartOptions& opt) {
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = opt.width - ml - mr;
  const double ph = opt.height - mt - mb;
  const double floor_y = 1e-16;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      double yy = opt.log_y ? std::log10(std::max(y, floor_y)) : y;
      if (first) {
        xmin = xmax = x;
        ymin = ymax = yy;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, yy);
        ymax = std::max(ymax, yy);
      }
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) {
    const double yy = opt.log_y ? std::log10(std::max(y, floor_y)) : y;
    return mt + (ymax - yy) / (ymax - ymin) * ph;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
     << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width
     << " " << opt.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << opt.width / 2.0 << "\" y=\"22\" font-size=\"15\" "
     << "text-anchor=\"middle\" font-family=\"sans-serif\">" << opt.title
     << "</text>\n";

  // frame
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
     << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // y ticks: decades when log-scaled, five even ticks otherwise
  std::vector<double> yticks;
  if (opt.log_y) {
    for (int e = static_cast<int>(std::floor(ymin));
         e <= static_cast<int>(std::ceil(ymax)); ++e)
      if (e >= ymin - 1e-9 && e <= ymax + 1e-9) yticks.push_back(e);
  } else {
    for (int i = 0; i <= 4; ++i) yticks.push_back(ymin + (ymax - ymin) * i / 4);
  }
  for (double ty : yticks) {
    const double y = mt + (ymax - ty) / (ymax - ymin) * ph;
    os << "<line x1=\"" << ml << "\" y1=\"" << detail::svg_num(y) << "\" x2=\""
       << ml + pw << "\" y2=\"" << detail::svg_num(y)
       << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    const std::string label = opt.log_y
                                  ? ("1e" + std::to_string(static_cast<int>(ty)))
                                  : detail::tick_label(ty);
    os << "<text x=\"" << ml - 6 << "\" y=\"" << detail::svg_num(y + 4)
       << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
       << label << "</text>\n";
  }
  // x ticks
  for (int i = 0; i <= 4; ++i) {
    const double tx = xmin + (xmax - xmin) * i / 4;
    const double x = px(tx);
    os << "<line x1=\"" << detail::svg_num(x) << "\" y1=\"" << mt + ph
       << "\" x2=\"" << detail::svg_num(x) << "\" y2=\"" << mt + ph + 4
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << detail::svg_num(x) << "\" y=\"" << mt + ph + 18
       << "\" font-size=\"11\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\">"
       << detail::tick_label(tx) << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10
     << "\" font-size=\"12\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\">"
     << opt.x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" font-size=\"12\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" transform=\"rotate(-90 16 "
     << mt + ph / 2 << ")\">" << opt.y_label << "</text>\n";

  // series
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.points)
      os << detail::svg_num(px(x)) << "," << detail::svg_num(py(y)) << " ";
    os << "\"/>\n";
  }
  // legend
  double ly = mt + 14;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    os << "<line x1=\"" << ml + pw - 130 << "\" y1=\"" << ly - 4 << "\" x2=\""
       << ml + pw - 110 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 104 << "\" y=\"" << ly
       << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label
       << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
}

}  // namespace cluster_games

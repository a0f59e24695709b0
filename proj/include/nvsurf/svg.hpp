// svg.hpp - minimal vector-graphic line plots for sweep outputs. Each plot
// embeds its source CSV in an XML comment so the figure carries its own
// provenance.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nvsurf/errors.hpp"

namespace nvsurf {

struct PlotSeries {
  std::string label;
  std::string color = "#1f6fb2";
  bool dashed = false;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<PlotSeries> series;
  std::string provenance_csv;  // embedded verbatim as a comment
};

namespace detail {

inline double plot_tx(double v, bool logscale) {
  return logscale ? std::log10(v) : v;
}

}  // namespace detail

inline void save_svg_plot(const PlotSpec& spec, const std::string& path) {
  const double W = 640, H = 440;
  const double ml = 70, mr = 20, mt = 36, mb = 52;

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (spec.log_x && !(s.x[i] > 0)) continue;
      if (spec.log_y && !(s.y[i] > 0)) continue;
      const double tx = detail::plot_tx(s.x[i], spec.log_x);
      const double ty = detail::plot_tx(s.y[i], spec.log_y);
      xmin = std::min(xmin, tx); xmax = std::max(xmax, tx);
      ymin = std::min(ymin, ty); ymax = std::max(ymax, ty);
    }
  if (!(xmin <= xmax) || !(ymin <= ymax))
    throw ValidationError("svg plot: no finite data to plot");
  if (xmax == xmin) { xmax += 0.5; xmin -= 0.5; }
  if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }
  const double xpad = 0.03 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  auto px = [&](double v) {
    return ml + (detail::plot_tx(v, spec.log_x) - xmin) / (xmax - xmin) *
                    (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (detail::plot_tx(v, spec.log_y) - ymin) / (ymax - ymin) *
                        (H - mt - mb);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!spec.provenance_csv.empty()) {
    std::string safe = spec.provenance_csv;
    std::size_t pos = 0;
    while ((pos = safe.find("--", pos)) != std::string::npos)
      safe.replace(pos, 2, "__");
    os << "<!-- source CSV:\n" << safe << "\n-->\n";
  }
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  // Axes box and ticks.
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr
     << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / nticks;
    const double fy = ymin + (ymax - ymin) * i / nticks;
    const double vx = spec.log_x ? std::pow(10.0, fx) : fx;
    const double vy = spec.log_y ? std::pow(10.0, fy) : fy;
    const double X = ml + (W - ml - mr) * i / nticks;
    const double Y = H - mb - (H - mt - mb) * i / nticks;
    char lab[48];
    std::snprintf(lab, sizeof lab, "%.3g", vx);
    os << "<line x1=\"" << X << "\" y1=\"" << H - mb << "\" x2=\"" << X
       << "\" y2=\"" << H - mb + 5 << "\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << X << "\" y=\"" << H - mb + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << lab << "</text>\n";
    std::snprintf(lab, sizeof lab, "%.3g", vy);
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << Y << "\" x2=\"" << ml
       << "\" y2=\"" << Y << "\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << Y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << lab << "</text>\n";
  }
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">" << spec.x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (mt + H - mb) / 2 << ")\">" << spec.y_label << "</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" font-size=\"14\" "
        "text-anchor=\"middle\" font-weight=\"bold\">"
     << spec.title << "</text>\n";

  double legend_y = mt + 16;
  for (const auto& s : spec.series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1.6\"";
    if (s.dashed) os << " stroke-dasharray=\"6,4\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (spec.log_x && !(s.x[i] > 0)) continue;
      if (spec.log_y && !(s.y[i] > 0)) continue;
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "\"/>\n";
    if (!s.label.empty()) {
      os << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << legend_y
         << "\" x2=\"" << W - mr - 120 << "\" y2=\"" << legend_y
         << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
      if (s.dashed) os << " stroke-dasharray=\"6,4\"";
      os << "/>\n";
      os << "<text x=\"" << W - mr - 114 << "\" y=\"" << legend_y + 4
         << "\" font-size=\"11\">" << s.label << "</text>\n";
      legend_y += 16;
    }
  }
  os << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw ValidationError("svg plot: cannot open " + path);
  f << os.str();
}

}  // namespace nvsurf

#ifndef NEURAL_LINUCB_SVG_HPP_
#define NEURAL_LINUCB_SVG_HPP_

// Cumulative-regret chart: one mean polyline per algorithm over a shaded
// +-1 std band, with axis labels and a legend.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "neural_linucb/trace.hpp"

namespace nlucb {

struct SvgOptions {
  int width = 800;
  int height = 500;
  std::size_t max_points = 600;  // per series, after downsampling
  std::string title = "cumulative regret";
};

namespace internal {

inline std::string XmlEscape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

inline std::string Fixed(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

// Evenly spaced row indices, always keeping the last row.
inline std::vector<std::size_t> Downsample(std::size_t n, std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  if (n <= max_points || max_points < 2) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < max_points; ++k) idx.push_back(k * (n - 1) / (max_points - 1));
  return idx;
}

inline double NiceStep(double range, int ticks) {
  const double raw = range / ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= f * mag) return f * mag;
  }
  return 10.0 * mag;
}

}  // namespace internal

inline const char* SeriesColor(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

inline std::string RenderSvg(const std::vector<Aggregate>& aggregates, const SvgOptions& options = {}) {
  if (aggregates.empty()) throw std::invalid_argument("emit_svg: no aggregates to plot");
  double t_max = 1.0;
  double y_max = 0.0;
  for (const Aggregate& agg : aggregates) {
    for (const AggregateRow& r : agg.rows) {
      t_max = std::max(t_max, static_cast<double>(r.t));
      y_max = std::max(y_max, r.mean + r.stddev);
    }
  }
  if (y_max <= 0.0) y_max = 1.0;
  const double left = 80, right = 180, top = 40, bottom = 60;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;
  auto sx = [&](double t) { return left + pw * t / t_max; };
  auto sy = [&](double y) { return top + ph * (1.0 - y / y_max); };
  using internal::Fixed;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
      << "\" viewBox=\"0 0 " << options.width << ' ' << options.height << "\" font-family=\"sans-serif\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << options.width << "\" height=\"" << options.height
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << Fixed(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << internal::XmlEscape(options.title) << "</text>\n";

  svg << "<g stroke=\"#dddddd\" font-size=\"11\" fill=\"#333333\">\n";
  const double ystep = internal::NiceStep(y_max, 5);
  for (double y = 0.0; y <= y_max * (1 + 1e-9); y += ystep) {
    svg << "<line x1=\"" << Fixed(left) << "\" y1=\"" << Fixed(sy(y)) << "\" x2=\"" << Fixed(left + pw)
        << "\" y2=\"" << Fixed(sy(y)) << "\"/>"
        << "<text stroke=\"none\" x=\"" << Fixed(left - 6) << "\" y=\"" << Fixed(sy(y) + 4)
        << "\" text-anchor=\"end\">" << FormatG9(y) << "</text>\n";
  }
  const double tstep = internal::NiceStep(t_max, 6);
  for (double t = 0.0; t <= t_max * (1 + 1e-9); t += tstep) {
    svg << "<line x1=\"" << Fixed(sx(t)) << "\" y1=\"" << Fixed(top) << "\" x2=\"" << Fixed(sx(t)) << "\" y2=\""
        << Fixed(top + ph) << "\"/>"
        << "<text stroke=\"none\" x=\"" << Fixed(sx(t)) << "\" y=\"" << Fixed(top + ph + 16)
        << "\" text-anchor=\"middle\">" << FormatG9(t) << "</text>\n";
  }
  svg << "</g>\n"
      << "<rect x=\"" << Fixed(left) << "\" y=\"" << Fixed(top) << "\" width=\"" << Fixed(pw) << "\" height=\""
      << Fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << Fixed(left + pw / 2) << "\" y=\"" << Fixed(options.height - 15)
      << "\" text-anchor=\"middle\" font-size=\"13\">round</text>\n"
      << "<text x=\"20\" y=\"" << Fixed(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
      << Fixed(top + ph / 2) << ")\">cumulative regret</text>\n";

  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const Aggregate& agg = aggregates[i];
    const std::vector<std::size_t> idx = internal::Downsample(agg.rows.size(), options.max_points);
    const char* color = SeriesColor(i);
    const std::string tag = internal::XmlEscape(agg.algorithm);
    if (!idx.empty()) {
      svg << "<polygon class=\"band\" data-algorithm=\"" << tag << "\" fill=\"" << color
          << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t k : idx) {
        const AggregateRow& r = agg.rows[k];
        svg << Fixed(sx(r.t)) << ',' << Fixed(sy(r.mean + r.stddev)) << ' ';
      }
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
        const AggregateRow& r = agg.rows[*it];
        svg << Fixed(sx(r.t)) << ',' << Fixed(sy(std::max(0.0, r.mean - r.stddev))) << ' ';
      }
      svg << "\"/>\n";
    }
    svg << "<polyline class=\"mean\" data-algorithm=\"" << tag << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k : idx) {
      const AggregateRow& r = agg.rows[k];
      svg << Fixed(sx(r.t)) << ',' << Fixed(sy(r.mean)) << ' ';
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 20.0 * i;
    svg << "<g class=\"legend\"><line x1=\"" << Fixed(left + pw + 15) << "\" y1=\"" << Fixed(ly) << "\" x2=\""
        << Fixed(left + pw + 40) << "\" y2=\"" << Fixed(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/><text x=\"" << Fixed(left + pw + 46) << "\" y=\"" << Fixed(ly + 4)
        << "\" font-size=\"12\">" << tag << "</text></g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void EmitSvg(const std::vector<Aggregate>& aggregates, const std::string& path,
                    const SvgOptions& options = {}) {
  const std::string text = RenderSvg(aggregates, options);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_SVG_HPP_

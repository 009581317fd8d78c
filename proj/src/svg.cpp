#include "oodbench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "oodbench/metrics.hpp"

namespace oodbench::svg {

namespace {

const char* kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

/// Two-stop yellow-to-red ramp for per-point color values.
std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r0 = 0xfe, g0 = 0xe0, b0 = 0x8b;
  const int r1 = 0xd7, g1 = 0x30, b1 = 0x27;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(r0 + t * (r1 - r0))),
                static_cast<int>(std::lround(g0 + t * (g1 - g0))),
                static_cast<int>(std::lround(b0 + t * (b1 - b0))));
  return buf;
}

struct Frame {
  double left, right, top, bottom;          // plot rectangle in pixels
  double x_min, x_max, y_min, y_max;        // data ranges

  double sx(double x) const {
    return left + (x - x_min) / (x_max - x_min) * (right - left);
  }
  double sy(double y) const {
    return bottom - (y - y_min) / (y_max - y_min) * (bottom - top);
  }
};

void pad_range(double* lo, double* hi) {
  if (*lo > *hi) throw ConfigError("svg: empty data range");
  if (*lo == *hi) {
    const double pad = std::max(0.5, std::fabs(*lo) * 0.1);
    *lo -= pad;
    *hi += pad;
  } else {
    const double pad = (*hi - *lo) * 0.05;
    *lo -= pad;
    *hi += pad;
  }
}

Frame make_frame(const PlotSpec& spec, double x_lo, double x_hi, double y_lo, double y_hi,
                 bool pad_x = true, bool pad_y = true) {
  if (spec.x_min <= spec.x_max) {
    x_lo = spec.x_min;
    x_hi = spec.x_max;
  } else if (pad_x) {
    pad_range(&x_lo, &x_hi);
  }
  if (spec.y_min <= spec.y_max) {
    y_lo = spec.y_min;
    y_hi = spec.y_max;
  } else if (pad_y) {
    pad_range(&y_lo, &y_hi);
  }
  if (!(x_lo < x_hi) || !(y_lo < y_hi)) throw ConfigError("svg: degenerate axis range");
  Frame f;
  f.left = 62.0;
  f.right = spec.width - 18.0;
  f.top = 42.0;
  f.bottom = spec.height - 52.0;
  f.x_min = x_lo;
  f.x_max = x_hi;
  f.y_min = y_lo;
  f.y_max = y_hi;
  return f;
}

void open_svg(std::ostringstream& out, const PlotSpec& spec) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << " "
      << spec.height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" fill=\"#ffffff\"/>\n";
  if (!spec.title.empty()) {
    out << "<text x=\"" << spec.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape(spec.title)
        << "</text>\n";
  }
}

void draw_axes(std::ostringstream& out, const PlotSpec& spec, const Frame& f) {
  out << "<g stroke=\"#d0d0d0\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x_min + (f.x_max - f.x_min) * i / 5.0;
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<line x1=\"" << px(f.sx(xv)) << "\" y1=\"" << px(f.top) << "\" x2=\""
        << px(f.sx(xv)) << "\" y2=\"" << px(f.bottom) << "\"/>\n";
    out << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.sy(yv)) << "\" x2=\""
        << px(f.right) << "\" y2=\"" << px(f.sy(yv)) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<g stroke=\"#000000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.bottom) << "\" x2=\""
      << px(f.right) << "\" y2=\"" << px(f.bottom) << "\"/>\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.top) << "\" x2=\""
      << px(f.left) << "\" y2=\"" << px(f.bottom) << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x_min + (f.x_max - f.x_min) * i / 5.0;
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<text x=\"" << px(f.sx(xv)) << "\" y=\"" << px(f.bottom + 16.0)
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    out << "<text x=\"" << px(f.left - 6.0) << "\" y=\"" << px(f.sy(yv) + 4.0)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  out << "</g>\n";
  if (!spec.x_label.empty()) {
    out << "<text x=\"" << px((f.left + f.right) / 2.0) << "\" y=\""
        << px(spec.height - 12.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(spec.x_label) << "</text>\n";
  }
  if (!spec.y_label.empty()) {
    const double cx = 16.0, cy = (f.top + f.bottom) / 2.0;
    out << "<text x=\"" << px(cx) << "\" y=\"" << px(cy)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 " << px(cx) << " " << px(cy) << ")\">"
        << escape(spec.y_label) << "</text>\n";
  }
}

/// Legend swatches are rectangles on purpose: circle elements are reserved
/// for scatter markers.
void draw_legend(std::ostringstream& out, const Frame& f,
                 const std::vector<std::pair<std::string, std::string>>& entries) {
  if (entries.empty()) return;
  double y = f.top + 8.0;
  for (const auto& [name, color] : entries) {
    out << "<rect x=\"" << px(f.right - 150.0) << "\" y=\"" << px(y - 9.0)
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << px(f.right - 133.0) << "\" y=\"" << px(y + 2.0)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(name)
        << "</text>\n";
    y += 18.0;
  }
}

}  // namespace

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string scatter_svg(const PlotSpec& spec, const std::vector<ScatterSeries>& series) {
  if (series.empty()) throw ConfigError("scatter_svg: no series");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  std::size_t points = 0;
  for (const ScatterSeries& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("scatter_svg: x/y length mismatch");
    if (!s.color_value.empty() && s.color_value.size() != s.x.size())
      throw ConfigError("scatter_svg: color length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
      ++points;
    }
  }
  if (points == 0) throw ConfigError("scatter_svg: no points");

  std::ostringstream out;
  open_svg(out, spec);
  const Frame f = make_frame(spec, x_lo, x_hi, y_lo, y_hi);
  draw_axes(out, spec, f);
  if (spec.diagonal) {
    const double lo = std::max(f.x_min, f.y_min), hi = std::min(f.x_max, f.y_max);
    if (lo < hi) {
      out << "<line x1=\"" << px(f.sx(lo)) << "\" y1=\"" << px(f.sy(lo)) << "\" x2=\""
          << px(f.sx(hi)) << "\" y2=\"" << px(f.sy(hi))
          << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
    }
  }

  double ramp_lo = 0.0, ramp_hi = 1.0;
  bool have_ramp = false;
  for (const ScatterSeries& s : series) {
    for (double v : s.color_value) {
      if (!have_ramp) {
        ramp_lo = ramp_hi = v;
        have_ramp = true;
      }
      ramp_lo = std::min(ramp_lo, v);
      ramp_hi = std::max(ramp_hi, v);
    }
  }

  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const ScatterSeries& s = series[si];
    const std::string flat = kPalette[si % 8];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::string color = flat;
      if (!s.color_value.empty()) {
        const double span = ramp_hi - ramp_lo;
        color = ramp_color(span > 0.0 ? (s.color_value[i] - ramp_lo) / span : 0.5);
      }
      out << "<circle cx=\"" << px(f.sx(s.x[i])) << "\" cy=\"" << px(f.sy(s.y[i]))
          << "\" r=\"3.5\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
    }
    if (!s.name.empty())
      legend.emplace_back(s.name, s.color_value.empty() ? flat : ramp_color(0.8));
  }
  draw_legend(out, f, legend);
  out << "</svg>\n";
  return out.str();
}

BoxStats tukey_stats(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("tukey_stats: no values");
  BoxStats s;
  s.q1 = metrics::percentile(values, 25.0);
  s.median = metrics::percentile(values, 50.0);
  s.q3 = metrics::percentile(values, 75.0);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr, hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_lo = s.q3;
  s.whisker_hi = s.q1;
  for (double v : values) {
    if (v >= lo_fence && v < s.whisker_lo) s.whisker_lo = v;
    if (v <= hi_fence && v > s.whisker_hi) s.whisker_hi = v;
  }
  s.whisker_lo = std::min(s.whisker_lo, s.q1);
  s.whisker_hi = std::max(s.whisker_hi, s.q3);
  return s;
}

std::string boxplot_svg(const PlotSpec& spec, const std::vector<BoxGroup>& groups) {
  if (groups.empty()) throw ConfigError("boxplot_svg: no groups");
  std::vector<BoxStats> stats;
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  for (const BoxGroup& g : groups) {
    stats.push_back(tukey_stats(g.values));
    y_lo = std::min(y_lo, stats.back().whisker_lo);
    y_hi = std::max(y_hi, stats.back().whisker_hi);
  }

  PlotSpec local = spec;
  local.x_label.clear();
  std::ostringstream out;
  open_svg(out, local);
  Frame f = make_frame(local, 0.0, static_cast<double>(groups.size()), y_lo, y_hi,
                       /*pad_x=*/false, /*pad_y=*/true);

  // Horizontal grid plus the y axis only; group slots replace the x axis.
  out << "<g stroke=\"#d0d0d0\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.sy(yv)) << "\" x2=\""
        << px(f.right) << "\" y2=\"" << px(f.sy(yv)) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<g stroke=\"#000000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.bottom) << "\" x2=\""
      << px(f.right) << "\" y2=\"" << px(f.bottom) << "\"/>\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.top) << "\" x2=\""
      << px(f.left) << "\" y2=\"" << px(f.bottom) << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<text x=\"" << px(f.left - 6.0) << "\" y=\"" << px(f.sy(yv) + 4.0)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  out << "</g>\n";
  if (!spec.y_label.empty()) {
    const double cx = 16.0, cy = (f.top + f.bottom) / 2.0;
    out << "<text x=\"" << px(cx) << "\" y=\"" << px(cy)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 " << px(cx) << " " << px(cy) << ")\">"
        << escape(spec.y_label) << "</text>\n";
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const BoxStats& s = stats[gi];
    const double cx = f.sx(static_cast<double>(gi) + 0.5);
    const double slot = (f.right - f.left) / static_cast<double>(groups.size());
    const double half = 0.28 * slot;
    out << "<line x1=\"" << px(cx) << "\" y1=\"" << px(f.sy(s.whisker_lo)) << "\" x2=\""
        << px(cx) << "\" y2=\"" << px(f.sy(s.q1)) << "\" stroke=\"#000000\"/>\n";
    out << "<line x1=\"" << px(cx) << "\" y1=\"" << px(f.sy(s.q3)) << "\" x2=\""
        << px(cx) << "\" y2=\"" << px(f.sy(s.whisker_hi)) << "\" stroke=\"#000000\"/>\n";
    for (double w : {s.whisker_lo, s.whisker_hi}) {
      out << "<line x1=\"" << px(cx - half * 0.6) << "\" y1=\"" << px(f.sy(w))
          << "\" x2=\"" << px(cx + half * 0.6) << "\" y2=\"" << px(f.sy(w))
          << "\" stroke=\"#000000\"/>\n";
    }
    out << "<rect x=\"" << px(cx - half) << "\" y=\"" << px(f.sy(s.q3)) << "\" width=\""
        << px(2.0 * half) << "\" height=\"" << px(f.sy(s.q1) - f.sy(s.q3))
        << "\" fill=\"" << kPalette[0] << "\" fill-opacity=\"0.45\" stroke=\"#000000\"/>\n";
    out << "<line x1=\"" << px(cx - half) << "\" y1=\"" << px(f.sy(s.median)) << "\" x2=\""
        << px(cx + half) << "\" y2=\"" << px(f.sy(s.median))
        << "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << px(cx) << "\" y=\"" << px(f.bottom + 16.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << escape(groups[gi].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string bar_svg(const PlotSpec& spec, const std::vector<std::string>& group_labels,
                    const std::vector<BarSeries>& series) {
  if (group_labels.empty() || series.empty()) throw ConfigError("bar_svg: empty input");
  double y_lo = 0.0, y_hi = 0.0;
  for (const BarSeries& s : series) {
    if (s.values.size() != group_labels.size())
      throw ConfigError("bar_svg: series length mismatch");
    for (double v : s.values) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  y_hi += (y_hi - y_lo) * 0.05;

  PlotSpec local = spec;
  local.x_label.clear();
  std::ostringstream out;
  open_svg(out, local);
  const Frame f = make_frame(local, 0.0, static_cast<double>(group_labels.size()), y_lo,
                             y_hi, /*pad_x=*/false, /*pad_y=*/false);

  out << "<g stroke=\"#d0d0d0\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.sy(yv)) << "\" x2=\""
        << px(f.right) << "\" y2=\"" << px(f.sy(yv)) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<text x=\"" << px(f.left - 6.0) << "\" y=\"" << px(f.sy(yv) + 4.0)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  out << "</g>\n";

  const double slot = (f.right - f.left) / static_cast<double>(group_labels.size());
  const double band = 0.8 * slot / static_cast<double>(series.size());
  const double base_y = f.sy(std::max(0.0, f.y_min));
  for (std::size_t si = 0; si < series.size(); ++si) {
    const std::string color = kPalette[si % 8];
    for (std::size_t gi = 0; gi < group_labels.size(); ++gi) {
      const double v = series[si].values[gi];
      const double x0 = f.left + slot * (static_cast<double>(gi) + 0.1) +
                        band * static_cast<double>(si);
      const double y_v = f.sy(v);
      const double top = std::min(y_v, base_y), h = std::fabs(y_v - base_y);
      out << "<rect x=\"" << px(x0) << "\" y=\"" << px(top) << "\" width=\""
          << px(band * 0.92) << "\" height=\"" << px(h) << "\" fill=\"" << color
          << "\"/>\n";
    }
  }
  out << "<g stroke=\"#000000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.bottom) << "\" x2=\""
      << px(f.right) << "\" y2=\"" << px(f.bottom) << "\"/>\n"
      << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.top) << "\" x2=\""
      << px(f.left) << "\" y2=\"" << px(f.bottom) << "\"/>\n</g>\n";
  for (std::size_t gi = 0; gi < group_labels.size(); ++gi) {
    out << "<text x=\"" << px(f.left + slot * (static_cast<double>(gi) + 0.5)) << "\" y=\""
        << px(f.bottom + 16.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << escape(group_labels[gi]) << "</text>\n";
  }
  if (!spec.y_label.empty()) {
    const double cx = 16.0, cy = (f.top + f.bottom) / 2.0;
    out << "<text x=\"" << px(cx) << "\" y=\"" << px(cy)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 " << px(cx) << " " << px(cy) << ")\">"
        << escape(spec.y_label) << "</text>\n";
  }
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t si = 0; si < series.size(); ++si) {
    if (!series[si].name.empty()) legend.emplace_back(series[si].name, kPalette[si % 8]);
  }
  draw_legend(out, f, legend);
  out << "</svg>\n";
  return out.str();
}

std::string pr_curve_svg(const PlotSpec& spec, const std::vector<CurveSeries>& curves) {
  if (curves.empty()) throw ConfigError("pr_curve_svg: no curves");
  PlotSpec local = spec;
  local.x_min = 0.0;
  local.x_max = 1.0;
  local.y_min = 0.0;
  local.y_max = 1.0;
  if (local.x_label.empty()) local.x_label = "recall";
  if (local.y_label.empty()) local.y_label = "precision";
  std::ostringstream out;
  open_svg(out, local);
  const Frame f = make_frame(local, 0.0, 1.0, 0.0, 1.0);
  draw_axes(out, local, f);
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const CurveSeries& c = curves[ci];
    if (c.x.size() != c.y.size() || c.x.empty())
      throw ConfigError("pr_curve_svg: bad curve '" + c.name + "'");
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[ci % 8]
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (i) out << " ";
      out << px(f.sx(c.x[i])) << "," << px(f.sy(c.y[i]));
    }
    out << "\"/>\n";
    if (!c.name.empty()) legend.emplace_back(c.name, kPalette[ci % 8]);
  }
  draw_legend(out, f, legend);
  out << "</svg>\n";
  return out.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto check = [](const std::string& cell) {
    if (cell.find(',') != std::string::npos || cell.find('\n') != std::string::npos)
      throw ConfigError("write_csv: cell contains a separator: " + cell);
  };
  std::ofstream out(path);
  if (!out) throw DataError("write_csv: cannot open " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    check(header[i]);
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw ConfigError("write_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) {
      check(row[i]);
      out << row[i] << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw DataError("write_csv: write failed: " + path.string());
}

}  // namespace oodbench::svg

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oodbench/common.hpp"

namespace oodbench::svg {

/// Fixed-precision number formatting shared by every emitter so regenerated
/// output is byte-stable.
std::string fmt(double v);

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  int width = 640;
  int height = 440;
  // Auto-ranged from the data when min > max (the default).
  double x_min = 1.0, x_max = 0.0;
  double y_min = 1.0, y_max = 0.0;
  bool diagonal = false;  // y = x reference line
};

struct ScatterSeries {
  std::string name;
  std::vector<double> x, y;
  /// Optional per-point values mapped onto a light-to-dark color ramp;
  /// empty means the series takes one flat palette color.
  std::vector<double> color_value;
};

/// One circle element per data point; nothing else in the drawing uses a
/// circle, so markers are countable.
std::string scatter_svg(const PlotSpec& spec, const std::vector<ScatterSeries>& series);

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};

struct BoxStats {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;  // most extreme data in 1.5 IQR
};

BoxStats tukey_stats(const std::vector<double>& values);

/// Tukey boxes without outlier markers; constant data collapses the box and
/// whiskers onto the median line.
std::string boxplot_svg(const PlotSpec& spec, const std::vector<BoxGroup>& groups);

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one entry per group
};

/// Grouped vertical bars; bars of one series share a color.
std::string bar_svg(const PlotSpec& spec, const std::vector<std::string>& group_labels,
                    const std::vector<BarSeries>& series);

struct CurveSeries {
  std::string name;
  std::vector<double> x, y;
};

/// Polyline per curve on fixed [0, 1] x [0, 1] axes.
std::string pr_curve_svg(const PlotSpec& spec, const std::vector<CurveSeries>& curves);

/// Minimal CSV writer; cells must not contain commas or newlines.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace oodbench::svg

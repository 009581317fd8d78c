#pragma once

#include <vector>

#include "oodbench/image.hpp"
#include "oodbench/metrics.hpp"

namespace oodbench::scoring {

/// Pixelwise mean of member maps. Every member must already be inverted
/// (error polarity) so the average is an anomaly map in [0, 1].
Image2D anomaly_map(const std::vector<const metrics::MetricMap*>& members);

/// Slice-level score: mean over every pixel, background included.
double slice_score(const Image2D& anomaly);

}  // namespace oodbench::scoring

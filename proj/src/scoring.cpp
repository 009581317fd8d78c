#include "oodbench/scoring.hpp"

namespace oodbench::scoring {

Image2D anomaly_map(const std::vector<const metrics::MetricMap*>& members) {
  if (members.empty()) throw ConfigError("anomaly_map: need at least one member map");
  const Image2D& first = members[0]->values;
  for (const metrics::MetricMap* m : members) {
    if (!m->inverted)
      throw ConfigError("anomaly_map: member '" + m->metric + "' was not inverted");
    if (!m->values.same_size(first)) throw ConfigError("anomaly_map: member sizes differ");
  }
  Image2D out(first.width, first.height, 0.0);
  const double inv = 1.0 / static_cast<double>(members.size());
  for (const metrics::MetricMap* m : members) {
    for (std::size_t i = 0; i < out.pixel_count(); ++i) out.data[i] += m->values.data[i];
  }
  for (double& v : out.data) v *= inv;
  return out;
}

double slice_score(const Image2D& anomaly) {
  double s = 0.0;
  for (double v : anomaly.data) s += v;
  return s / static_cast<double>(anomaly.pixel_count());
}

}  // namespace oodbench::scoring

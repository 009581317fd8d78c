#include "oodbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "oodbench/imgops.hpp"
#include "oodbench/io.hpp"
#include "oodbench/rng.hpp"

namespace oodbench::data {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct EllipseSpec {
  double cx, cy, ax, ay, rot, intensity;
};

struct Wave {
  double freq, dir, phase, amp;
};

struct SliceRecipe {
  double cx, cy, ax, ay, rot;
  double grad_dir, grad_mag;
  double tex_amp;
  std::vector<EllipseSpec> inner;
  std::vector<Wave> waves;  // per-subject smooth modulation
  std::vector<Wave> tex;    // shared fine texture, identical across subjects
};

/// Signed coverage of an ellipse boundary with a soft transition band.
double ellipse_coverage(double px, double py, double cx, double cy, double ax, double ay,
                        double rot, double band = 1.5) {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(rot), s = std::sin(rot);
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  const double rho = std::sqrt(u * u / (ax * ax) + v * v / (ay * ay));
  const double dist = (1.0 - rho) * std::min(ax, ay);
  return std::clamp(dist / band + 0.5, 0.0, 1.0);
}

/// Draw order below is load-bearing: it defines the per-subject and
/// per-slice random streams.
SliceRecipe make_recipe(const PhantomConfig& cfg, int subject, int slice) {
  const double S = cfg.size;
  SliceRecipe r;

  rng::SplitMix64 sub = rng::stream(cfg.seed, "subject", static_cast<std::uint64_t>(subject));
  r.cx = S * (0.5 + sub.uniform(-0.02, 0.02));
  r.cy = S * (0.5 + sub.uniform(-0.02, 0.02));
  r.ax = S * sub.uniform(0.34, 0.42);
  r.ay = S * sub.uniform(0.38, 0.46);
  r.rot = sub.uniform(-0.15, 0.15);
  r.grad_dir = sub.uniform(0.0, kTwoPi);
  r.grad_mag = sub.uniform(0.05, 0.15);
  const int n_inner = 6 + static_cast<int>(sub.below(5));
  for (int i = 0; i < n_inner; ++i) {
    EllipseSpec e;
    const double ang = sub.uniform(0.0, kTwoPi);
    const double fr = sub.uniform(0.0, 0.55);
    e.cx = r.cx + fr * 0.8 * r.ax * std::cos(ang);
    e.cy = r.cy + fr * 0.8 * r.ay * std::sin(ang);
    e.ax = S * sub.uniform(0.05, 0.15);
    e.ay = S * sub.uniform(0.05, 0.15);
    e.rot = sub.uniform(0.0, kTwoPi / 2.0);
    e.intensity = sub.uniform(0.30, 0.78);
    r.inner.push_back(e);
  }
  for (int i = 0; i < 3; ++i) {
    Wave w;
    w.freq = sub.uniform(2.0, 6.0);
    w.dir = sub.uniform(0.0, kTwoPi);
    w.phase = sub.uniform(0.0, kTwoPi);
    w.amp = sub.uniform(0.005, 0.018);
    r.waves.push_back(w);
  }
  r.tex_amp = sub.uniform(0.95, 1.05);

  // Cohort-wide fine texture: frequencies and phases depend only on the
  // dataset seed, so every subject carries the same pattern. A trained
  // reconstructor reproduces it through the corpus mean.
  rng::SplitMix64 tx = rng::stream(cfg.seed, "texture");
  for (int i = 0; i < 6; ++i) {
    Wave w;
    w.freq = tx.uniform(8.0, 22.0);
    w.dir = tx.uniform(0.0, kTwoPi);
    w.phase = tx.uniform(0.0, kTwoPi);
    w.amp = tx.uniform(0.028, 0.055);
    r.tex.push_back(w);
  }

  rng::SplitMix64 sl = rng::stream(cfg.seed, "slice", static_cast<std::uint64_t>(subject),
                                   static_cast<std::uint64_t>(slice));
  r.cx += sl.uniform(-0.25, 0.25);
  r.cy += sl.uniform(-0.25, 0.25);
  r.ax *= 1.0 + sl.uniform(-0.02, 0.02);
  r.ay *= 1.0 + sl.uniform(-0.02, 0.02);
  r.rot += sl.uniform(-0.02, 0.02);
  for (EllipseSpec& e : r.inner) {
    e.cx += sl.uniform(-0.5, 0.5);
    e.cy += sl.uniform(-0.5, 0.5);
    e.ax *= 1.0 + sl.uniform(-0.04, 0.04);
    e.ay *= 1.0 + sl.uniform(-0.04, 0.04);
    e.rot += sl.uniform(-0.025, 0.025);
    e.intensity = std::clamp(e.intensity + sl.uniform(-0.02, 0.02), 0.1, 1.0);
  }
  for (Wave& w : r.waves) w.phase += sl.uniform(-0.25, 0.25);
  return r;
}

}  // namespace

Image2D generate_phantom(const PhantomConfig& cfg, int subject, int slice) {
  if (cfg.size < 8) throw ConfigError("generate_phantom: size must be at least 8");
  if (subject < 0 || subject >= cfg.n_subjects || slice < 0 ||
      slice >= cfg.slices_per_subject)
    throw ConfigError("generate_phantom: subject/slice out of range");

  const SliceRecipe r = make_recipe(cfg, subject, slice);
  const double S = cfg.size;
  Image2D im(cfg.size, cfg.size);

#pragma omp parallel for
  for (int y = 0; y < cfg.size; ++y) {
    for (int x = 0; x < cfg.size; ++x) {
      const double px = x, py = y;
      const double cov_out = ellipse_coverage(px, py, r.cx, r.cy, r.ax, r.ay, r.rot, 2.5);
      if (cov_out == 0.0) {
        im.at(x, y) = 0.0;
        continue;
      }
      const double cov_in =
          ellipse_coverage(px, py, r.cx, r.cy, 0.92 * r.ax, 0.92 * r.ay, r.rot, 2.5);

      double t = 0.45;
      t += r.grad_mag * ((px - r.cx) * std::cos(r.grad_dir) +
                         (py - r.cy) * std::sin(r.grad_dir)) / S;
      for (const Wave& w : r.waves) {
        t += w.amp * std::sin(kTwoPi * w.freq * (px * std::cos(w.dir) + py * std::sin(w.dir)) / S +
                              w.phase);
      }
      for (const EllipseSpec& e : r.inner) {
        const double cov_e = ellipse_coverage(px, py, e.cx, e.cy, e.ax, e.ay, e.rot, 3.0);
        t = t * (1.0 - 0.7 * cov_e) + e.intensity * 0.7 * cov_e;
      }
      for (const Wave& w : r.tex) {
        t += r.tex_amp * w.amp *
             std::sin(kTwoPi * w.freq * (px * std::cos(w.dir) + py * std::sin(w.dir)) / S +
                      w.phase);
      }
      t = std::clamp(t, 0.05, 1.0);
      im.at(x, y) = cov_in * t + (cov_out - cov_in) * 0.9;
    }
  }
  return img::normalize_minmax(im);
}

std::pair<Corpus, Corpus> make_split_corpora(const PhantomConfig& cfg, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("make_split_corpora: train_fraction must lie in (0, 1)");
  if (cfg.n_subjects < 2) throw ConfigError("make_split_corpora: need at least two subjects");
  const int n_train = static_cast<int>(std::lround(train_fraction * cfg.n_subjects));
  if (n_train < 1 || n_train >= cfg.n_subjects)
    throw ConfigError("make_split_corpora: split leaves a role empty");

  std::vector<int> order(cfg.n_subjects);
  for (int i = 0; i < cfg.n_subjects; ++i) order[i] = i;
  rng::SplitMix64 g = rng::stream(cfg.seed, "split");
  for (int i = cfg.n_subjects - 1; i > 0; --i) {
    const int j = static_cast<int>(g.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::set<int> train_subjects(order.begin(), order.begin() + n_train);

  Corpus train, val;
  train.role = "train";
  val.role = "val";
  train.width = train.height = val.width = val.height = cfg.size;
  char buf[64];
  for (int s = 0; s < cfg.n_subjects; ++s) {
    Corpus& dst = train_subjects.count(s) ? train : val;
    for (int z = 0; z < cfg.slices_per_subject; ++z) {
      std::snprintf(buf, sizeof(buf), "phantom_s%03d_z%02d", s, z);
      dst.ids.emplace_back(buf);
      dst.subject_of.push_back(s);
      dst.images.push_back(generate_phantom(cfg, s, z));
    }
  }
  return {std::move(train), std::move(val)};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& root,
                 const nlohmann::ordered_json& extra) {
  const std::filesystem::path dir = root / corpus.role;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    io::save_image_f32(corpus.images[i], dir / corpus.ids[i]);
  }
  nlohmann::ordered_json m;
  m["role"] = corpus.role;
  m["width"] = corpus.width;
  m["height"] = corpus.height;
  m["count"] = corpus.size();
  m["ids"] = corpus.ids;
  m["version"] = kVersion;
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) m[k] = v;
  }
  io::write_json_file(m, dir / "manifest.json");
}

Corpus load_corpus_dir(const std::filesystem::path& dir, const std::string& role) {
  if (!std::filesystem::is_directory(dir))
    throw DataError("load_corpus_dir: not a directory: " + dir.string());
  std::vector<std::filesystem::path> f32s, pgms;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".f32") f32s.push_back(entry.path());
    else if (ext == ".pgm") pgms.push_back(entry.path());
  }
  const bool use_f32 = !f32s.empty();
  std::vector<std::filesystem::path>& files = use_f32 ? f32s : pgms;
  if (files.empty())
    throw DataError("load_corpus_dir: no .f32 or .pgm images in " + dir.string());
  std::sort(files.begin(), files.end());

  Corpus c;
  c.role = role;
  for (const auto& p : files) {
    Image2D im = use_f32 ? io::load_image_f32(p) : io::load_pgm(p);
    if (c.images.empty()) {
      c.width = im.width;
      c.height = im.height;
    } else if (im.width != c.width || im.height != c.height) {
      throw DataError("load_corpus_dir: mixed slice sizes in " + dir.string());
    }
    c.ids.push_back(p.stem().string());
    c.subject_of.push_back(-1);
    c.images.push_back(img::normalize_minmax(im));
  }
  return c;
}

}  // namespace oodbench::data

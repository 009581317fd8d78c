#include "oodbench/reconstructors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "oodbench/io.hpp"
#include "oodbench/rng.hpp"

namespace oodbench::recon {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_corpus(const data::Corpus& c, const char* who) {
  if (c.images.empty()) throw DataError(std::string(who) + ": empty corpus");
  for (const Image2D& im : c.images) {
    if (im.width != c.width || im.height != c.height)
      throw DataError(std::string(who) + ": corpus slice size mismatch");
  }
}

std::vector<double> mean_image(const data::Corpus& c) {
  const std::size_t d = static_cast<std::size_t>(c.width) * c.height;
  std::vector<double> mu(d, 0.0);
  for (const Image2D& im : c.images) {
    for (std::size_t i = 0; i < d; ++i) mu[i] += im.data[i];
  }
  const double inv = 1.0 / static_cast<double>(c.images.size());
  for (double& v : mu) v *= inv;
  return mu;
}

/// Number of fixed reduction chunks for sums over pixel index. A constant
/// keeps floating-point reduction order independent of the thread count.
constexpr int kChunks = 64;

}  // namespace

const char* loss_name(LossKind k) { return k == LossKind::L2 ? "l2" : "l1"; }

LossKind loss_from_name(const std::string& name) {
  if (name == "l2") return LossKind::L2;
  if (name == "l1") return LossKind::L1;
  throw ConfigError("loss_from_name: unknown loss '" + name + "'");
}

const char* policy_name(SelectPolicy p) {
  return p == SelectPolicy::Final ? "final" : "optimal";
}

SelectPolicy policy_from_name(const std::string& name) {
  if (name == "final") return SelectPolicy::Final;
  if (name == "optimal") return SelectPolicy::Optimal;
  throw ConfigError("policy_from_name: unknown policy '" + name + "'");
}

Image2D reconstruct_raw(const LinearModel& m, const Image2D& x) {
  if (x.width != m.width || x.height != m.height)
    throw ConfigError("reconstruct: image size does not match the model");
  const std::size_t d = x.pixel_count();
  const int k = m.latent_dim;
  std::vector<double> xc(d);
  for (std::size_t i = 0; i < d; ++i) xc[i] = x.data[i] - m.mean[i];
  std::vector<double> z(k, 0.0);
#pragma omp parallel for
  for (int kk = 0; kk < k; ++kk) {
    const double* row = &m.enc[static_cast<std::size_t>(kk) * d];
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += row[i] * xc[i];
    z[kk] = acc;
  }
  Image2D out(x.width, x.height);
#pragma omp parallel for
  for (long long i = 0; i < static_cast<long long>(d); ++i) {
    const double* row = &m.dec[static_cast<std::size_t>(i) * k];
    double acc = m.mean[i];
    for (int kk = 0; kk < k; ++kk) acc += row[kk] * z[kk];
    out.data[i] = acc;
  }
  return out;
}

Image2D reconstruct(const LinearModel& m, const Image2D& x) {
  Image2D out = reconstruct_raw(m, x);
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

double mean_abs_error(const Image2D& x, const Image2D& xhat) {
  if (!x.same_size(xhat)) throw ConfigError("mean_abs_error: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) s += std::fabs(x.data[i] - xhat.data[i]);
  return s / static_cast<double>(x.pixel_count());
}

double mean_squared_error(const Image2D& x, const Image2D& xhat) {
  if (!x.same_size(xhat)) throw ConfigError("mean_squared_error: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    const double r = x.data[i] - xhat.data[i];
    s += r * r;
  }
  return s / static_cast<double>(x.pixel_count());
}

BatchGradients ae_batch_gradients(const LinearModel& m,
                                  const std::vector<const Image2D*>& batch, LossKind loss) {
  if (batch.empty()) throw ConfigError("ae_batch_gradients: empty batch");
  const std::size_t d = static_cast<std::size_t>(m.width) * m.height;
  const int k = m.latent_dim;
  BatchGradients out;
  out.grad_enc.assign(m.enc.size(), 0.0);
  out.grad_dec.assign(m.dec.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (const Image2D* xp : batch) {
    const Image2D& x = *xp;
    std::vector<double> xc(d);
    for (std::size_t i = 0; i < d; ++i) xc[i] = x.data[i] - m.mean[i];
    std::vector<double> z(k, 0.0);
    for (int kk = 0; kk < k; ++kk) {
      const double* row = &m.enc[static_cast<std::size_t>(kk) * d];
      for (std::size_t i = 0; i < d; ++i) z[kk] += row[i] * xc[i];
    }
    std::vector<double> g(d);
    double loss_i = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double* row = &m.dec[i * k];
      double rec = 0.0;
      for (int kk = 0; kk < k; ++kk) rec += row[kk] * z[kk];
      const double r = rec - xc[i];  // equals (mean + D z) - x
      if (loss == LossKind::L2) {
        loss_i += r * r;
        g[i] = 2.0 * r;
      } else {
        loss_i += std::fabs(r);
        g[i] = sign_of(r);
      }
    }
    out.loss += loss_i * inv_b;

    // dec gradient: g z^T ; enc gradient: (D^T g) xc^T.
    for (std::size_t i = 0; i < d; ++i) {
      for (int kk = 0; kk < k; ++kk) out.grad_dec[i * k + kk] += inv_b * g[i] * z[kk];
    }
    std::vector<double> h(k, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double* row = &m.dec[i * k];
      for (int kk = 0; kk < k; ++kk) h[kk] += row[kk] * g[i];
    }
    for (int kk = 0; kk < k; ++kk) {
      for (std::size_t i = 0; i < d; ++i) out.grad_enc[kk * d + i] += inv_b * h[kk] * xc[i];
    }
  }
  return out;
}

TrainHistory fit_linear_ae(const data::Corpus& train, const data::Corpus& val,
                           const TrainConfig& cfg, bool keep_all_epochs) {
  check_corpus(train, "fit_linear_ae(train)");
  check_corpus(val, "fit_linear_ae(val)");
  if (train.width != val.width || train.height != val.height)
    throw DataError("fit_linear_ae: train and val sizes differ");
  if (cfg.latent_dim < 1) throw ConfigError("fit_linear_ae: latent_dim must be positive");
  if (cfg.epochs < 1) throw ConfigError("fit_linear_ae: epochs must be positive");
  if (cfg.batch_size < 1) throw ConfigError("fit_linear_ae: batch_size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("fit_linear_ae: learning rate must be positive");

  const std::size_t d = static_cast<std::size_t>(train.width) * train.height;
  const int k = cfg.latent_dim;
  const std::size_t n = train.images.size();

  LinearModel m;
  m.kind = ReconKind::LinearAE;
  m.width = train.width;
  m.height = train.height;
  m.latent_dim = k;
  m.mean = mean_image(train);
  m.enc.resize(static_cast<std::size_t>(k) * d);
  m.dec.resize(d * static_cast<std::size_t>(k));
  {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
    rng::SplitMix64 ge = rng::stream(cfg.seed, "init-enc");
    for (double& w : m.enc) w = ge.gauss(0.0, stddev);
    rng::SplitMix64 gd = rng::stream(cfg.seed, "init-dec");
    for (double& w : m.dec) w = gd.gauss(0.0, stddev);
  }

  // Centered copies of the training corpus, reused every epoch.
  std::vector<std::vector<double>> xc(n, std::vector<double>(d));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < d; ++i) xc[s][i] = train.images[s].data[i] - m.mean[i];
  }

  auto corpus_loss = [&](const data::Corpus& c) {
    double total = 0.0;
    for (const Image2D& im : c.images) {
      const Image2D rec = reconstruct_raw(m, im);
      double li = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double r = rec.data[i] - im.data[i];
        li += cfg.loss == LossKind::L2 ? r * r : std::fabs(r);
      }
      total += li;
    }
    return total / static_cast<double>(c.images.size());
  };

  TrainHistory hist;
  std::vector<std::size_t> perm(n);
  const int B = cfg.batch_size;
  std::vector<std::vector<double>> z(B, std::vector<double>(k));
  std::vector<std::vector<double>> g(B, std::vector<double>(d));
  std::vector<std::vector<double>> h(B, std::vector<double>(k));
  std::vector<double> h_partial(static_cast<std::size_t>(kChunks) * B * k);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate * std::pow(cfg.lr_decay, (epoch - 1) / cfg.lr_decay_every);

    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng::SplitMix64 gs = rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = gs.below(i + 1);
      std::swap(perm[i], perm[j]);
    }

    double epoch_loss_sum = 0.0;
    for (std::size_t base = 0; base < n; base += static_cast<std::size_t>(B)) {
      const int b = static_cast<int>(std::min<std::size_t>(B, n - base));
      const double inv_b = 1.0 / b;
      const double step = lr * inv_b;

      // z = enc * xc for each batch image; each (image, row) slot has one
      // writer, so the parallel loop is deterministic.
#pragma omp parallel for
      for (int kk = 0; kk < k; ++kk) {
        const double* row = &m.enc[static_cast<std::size_t>(kk) * d];
        for (int i = 0; i < b; ++i) {
          const double* xi = xc[perm[base + i]].data();
          double acc = 0.0;
          for (std::size_t t = 0; t < d; ++t) acc += row[t] * xi[t];
          z[i][kk] = acc;
        }
      }

      // Residual r = (mean + dec z) - x, one pixel row per writer.
#pragma omp parallel for
      for (long long dd = 0; dd < static_cast<long long>(d); ++dd) {
        const double* row = &m.dec[static_cast<std::size_t>(dd) * k];
        for (int i = 0; i < b; ++i) {
          double rec = 0.0;
          for (int kk = 0; kk < k; ++kk) rec += row[kk] * z[i][kk];
          g[i][dd] = rec - xc[perm[base + i]][dd];
        }
      }
      for (int i = 0; i < b; ++i) {
        double li = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
          li += cfg.loss == LossKind::L2 ? g[i][t] * g[i][t] : std::fabs(g[i][t]);
        }
        epoch_loss_sum += li;
      }
      // Convert residuals to dloss/dx_hat in place.
#pragma omp parallel for
      for (int i = 0; i < b; ++i) {
        for (std::size_t t = 0; t < d; ++t) {
          g[i][t] = cfg.loss == LossKind::L2 ? 2.0 * g[i][t] : sign_of(g[i][t]);
        }
      }

      // h = dec^T g via fixed chunks so the reduction order never changes.
      std::fill(h_partial.begin(), h_partial.end(), 0.0);
#pragma omp parallel for
      for (int c = 0; c < kChunks; ++c) {
        const std::size_t lo = d * static_cast<std::size_t>(c) / kChunks;
        const std::size_t hi = d * (static_cast<std::size_t>(c) + 1) / kChunks;
        double* part = &h_partial[static_cast<std::size_t>(c) * B * k];
        for (std::size_t dd = lo; dd < hi; ++dd) {
          const double* row = &m.dec[dd * k];
          for (int i = 0; i < b; ++i) {
            const double gv = g[i][dd];
            double* hp = &part[static_cast<std::size_t>(i) * k];
            for (int kk = 0; kk < k; ++kk) hp[kk] += row[kk] * gv;
          }
        }
      }
      for (int i = 0; i < b; ++i) std::fill(h[i].begin(), h[i].end(), 0.0);
      for (int c = 0; c < kChunks; ++c) {
        const double* part = &h_partial[static_cast<std::size_t>(c) * B * k];
        for (int i = 0; i < b; ++i) {
          for (int kk = 0; kk < k; ++kk) h[i][kk] += part[static_cast<std::size_t>(i) * k + kk];
        }
      }

      // Parameter updates; h was read before dec changes.
#pragma omp parallel for
      for (long long dd = 0; dd < static_cast<long long>(d); ++dd) {
        double* row = &m.dec[static_cast<std::size_t>(dd) * k];
        for (int kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (int i = 0; i < b; ++i) acc += g[i][dd] * z[i][kk];
          row[kk] -= step * acc;
        }
      }
#pragma omp parallel for
      for (int kk = 0; kk < k; ++kk) {
        double* row = &m.enc[static_cast<std::size_t>(kk) * d];
        for (int i = 0; i < b; ++i) {
          const double coeff = step * h[i][kk];
          const double* xi = xc[perm[base + i]].data();
          for (std::size_t t = 0; t < d; ++t) row[t] -= coeff * xi[t];
        }
      }
    }

    const double train_loss = epoch_loss_sum / static_cast<double>(n);
    const double val_loss = corpus_loss(val);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw NumericError("fit_linear_ae: diverged at epoch " + std::to_string(epoch) +
                         " (learning rate " + std::to_string(lr) + ")");
    hist.train_loss.push_back(train_loss);
    hist.val_loss.push_back(val_loss);

    m.epoch = epoch;
    if (hist.best.model.mean.empty() || val_loss < hist.best.val_loss) {
      hist.best = {epoch, train_loss, val_loss, m};
    }
    if (keep_all_epochs) hist.all.push_back({epoch, train_loss, val_loss, m});
    if (epoch == cfg.epochs) hist.final = {epoch, train_loss, val_loss, m};
  }
  return hist;
}

LinearModel fit_pca(const data::Corpus& train, int latent_dim, double tol, int max_iter,
                    std::uint64_t seed) {
  check_corpus(train, "fit_pca");
  if (latent_dim < 1) throw ConfigError("fit_pca: latent_dim must be positive");
  const std::size_t d = static_cast<std::size_t>(train.width) * train.height;
  const std::size_t n = train.images.size();

  LinearModel m;
  m.kind = ReconKind::Pca;
  m.width = train.width;
  m.height = train.height;
  m.latent_dim = latent_dim;
  m.mean = mean_image(train);

  std::vector<std::vector<double>> xc(n, std::vector<double>(d));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < d; ++i) xc[s][i] = train.images[s].data[i] - m.mean[i];
  }

  // Matrix-free covariance product: C v = (1/n) X^T (X v).
  std::vector<double> proj(n);
  auto cov_apply = [&](const std::vector<double>& v, std::vector<double>& out) {
#pragma omp parallel for
    for (long long s = 0; s < static_cast<long long>(n); ++s) {
      double acc = 0.0;
      const double* xs = xc[s].data();
      for (std::size_t i = 0; i < d; ++i) acc += xs[i] * v[i];
      proj[s] = acc;
    }
    std::fill(out.begin(), out.end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) {
      const double w = proj[s] * inv_n;
      const double* xs = xc[s].data();
      for (std::size_t i = 0; i < d; ++i) out[i] += w * xs[i];
    }
  };

  std::vector<std::vector<double>> comps;
  double lambda1 = 0.0;
  for (int j = 0; j < latent_dim; ++j) {
    std::vector<double> v(d), cv(d);
    rng::SplitMix64 g = rng::stream(seed, "pca-start", static_cast<std::uint64_t>(j));
    for (double& x : v) x = g.gauss();

    auto orthonormalize = [&](std::vector<double>& w) {
      for (const auto& u : comps) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += u[i] * w[i];
        for (std::size_t i = 0; i < d; ++i) w[i] -= dot * u[i];
      }
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (!(norm > 0.0)) throw NumericError("fit_pca: degenerate iterate");
      for (double& x : w) x /= norm;
    };
    orthonormalize(v);

    bool converged = false;
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      cov_apply(v, cv);
      lambda = 0.0;
      for (std::size_t i = 0; i < d; ++i) lambda += v[i] * cv[i];
      double resid = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double r = cv[i] - lambda * v[i];
        resid += r * r;
      }
      resid = std::sqrt(resid);
      const double scale = std::max(j == 0 ? lambda : lambda1, 1e-300);
      if (resid <= tol * scale) {
        converged = true;
        break;
      }
      v = cv;
      orthonormalize(v);
    }
    if (!converged)
      throw NumericError("fit_pca: power iteration did not converge for component " +
                         std::to_string(j));
    if (j == 0) lambda1 = lambda;

    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
      for (double& x : v) x = -x;
    }
    comps.push_back(std::move(v));
  }

  m.enc.resize(static_cast<std::size_t>(latent_dim) * d);
  m.dec.resize(d * static_cast<std::size_t>(latent_dim));
  for (int j = 0; j < latent_dim; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      m.enc[static_cast<std::size_t>(j) * d + i] = comps[j][i];
      m.dec[i * latent_dim + j] = comps[j][i];
    }
  }
  return m;
}

const Snapshot& select_snapshot(const TrainHistory& h, SelectPolicy p) {
  if (h.final.model.mean.empty()) throw ConfigError("select_snapshot: empty history");
  return p == SelectPolicy::Final ? h.final : h.best;
}

void save_model(const LinearModel& m, const std::filesystem::path& stem) {
  nlohmann::ordered_json j;
  j["kind"] = m.kind == ReconKind::LinearAE ? "linear_ae" : "pca";
  j["width"] = m.width;
  j["height"] = m.height;
  j["latent_dim"] = m.latent_dim;
  j["epoch"] = m.epoch;
  j["version"] = kVersion;
  std::filesystem::path meta = stem;
  meta += ".json";
  io::write_json_file(j, meta);
  auto blob = [&](const char* suffix, const std::vector<double>& v) {
    std::filesystem::path p = stem;
    p += suffix;
    io::write_f32_blob(v, p);
  };
  blob("_mean.f32", m.mean);
  blob("_enc.f32", m.enc);
  blob("_dec.f32", m.dec);
}

LinearModel load_model(const std::filesystem::path& stem) {
  std::filesystem::path meta = stem;
  meta += ".json";
  const auto j = io::read_json_file(meta);
  LinearModel m;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear_ae") m.kind = ReconKind::LinearAE;
  else if (kind == "pca") m.kind = ReconKind::Pca;
  else throw DataError("load_model: unknown kind '" + kind + "'");
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.latent_dim = j.at("latent_dim").get<int>();
  m.epoch = j.at("epoch").get<int>();
  auto blob = [&](const char* suffix) {
    std::filesystem::path p = stem;
    p += suffix;
    return io::read_f32_blob(p);
  };
  m.mean = blob("_mean.f32");
  m.enc = blob("_enc.f32");
  m.dec = blob("_dec.f32");
  const std::size_t d = static_cast<std::size_t>(m.width) * m.height;
  if (m.mean.size() != d || m.enc.size() != d * m.latent_dim ||
      m.dec.size() != d * m.latent_dim)
    throw DataError("load_model: blob sizes inconsistent with header: " + stem.string());
  return m;
}

}  // namespace oodbench::recon

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "oodbench/dataset.hpp"
#include "oodbench/image.hpp"

namespace oodbench::recon {

enum class ReconKind { LinearAE, Pca };
enum class LossKind { L2, L1 };
enum class SelectPolicy { Final, Optimal };

const char* loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);
const char* policy_name(SelectPolicy p);
SelectPolicy policy_from_name(const std::string& name);

struct TrainConfig {
  int latent_dim = 16;
  int epochs = 100;
  int batch_size = 4;
  double learning_rate = 1e-2;
  double lr_decay = 0.5;
  int lr_decay_every = 100;
  LossKind loss = LossKind::L2;
  std::uint64_t seed = 0;
};

/// x_hat = mean + dec * enc * (x - mean). enc is latent_dim x d row-major,
/// dec is d x latent_dim row-major, d = width * height.
struct LinearModel {
  ReconKind kind = ReconKind::LinearAE;
  int width = 0, height = 0, latent_dim = 0;
  int epoch = 0;
  std::vector<double> mean, enc, dec;
};

struct Snapshot {
  int epoch = 0;
  double train_loss = 0.0, val_loss = 0.0;
  LinearModel model;
};

struct TrainHistory {
  std::vector<double> train_loss, val_loss;  // index e-1 holds epoch e
  Snapshot best;    // lowest validation loss; earliest epoch wins ties
  Snapshot final;   // state after the last epoch
  std::vector<Snapshot> all;  // populated only on request
};

/// Minibatch SGD on the reconstruction loss. Per-image loss sums over
/// pixels; the batch gradient averages over the batch. The learning rate
/// decays by lr_decay every lr_decay_every epochs. Non-finite losses abort
/// with NumericError.
TrainHistory fit_linear_ae(const data::Corpus& train, const data::Corpus& val,
                           const TrainConfig& cfg, bool keep_all_epochs = false);

/// Principal components by power iteration with deflation on the centered
/// training corpus; enc rows are components, dec is enc transposed.
/// Component signs are fixed so the largest-magnitude entry is positive.
LinearModel fit_pca(const data::Corpus& train, int latent_dim, double tol = 1e-10,
                    int max_iter = 10000, std::uint64_t seed = 0);

/// Inference-time reconstruction, clipped to [0, 1].
Image2D reconstruct(const LinearModel& m, const Image2D& x);
/// Training-convention reconstruction without clipping.
Image2D reconstruct_raw(const LinearModel& m, const Image2D& x);

const Snapshot& select_snapshot(const TrainHistory& h, SelectPolicy p);

struct BatchGradients {
  double loss = 0.0;
  std::vector<double> grad_enc, grad_dec;
};

/// Loss and analytic parameter gradients for one batch at the given state.
/// Reference path for gradient checks; training applies the same math in a
/// fused form.
BatchGradients ae_batch_gradients(const LinearModel& m,
                                  const std::vector<const Image2D*>& batch, LossKind loss);

double mean_abs_error(const Image2D& x, const Image2D& xhat);
double mean_squared_error(const Image2D& x, const Image2D& xhat);

/// Writes <stem>.json plus _mean/_enc/_dec.f32 blobs.
void save_model(const LinearModel& m, const std::filesystem::path& stem);
LinearModel load_model(const std::filesystem::path& stem);

}  // namespace oodbench::recon

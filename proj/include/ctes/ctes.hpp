#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctes/dataset.hpp"
#include "ctes/nn/network.hpp"
#include "ctes/nn/optimizer.hpp"
#include "ctes/random.hpp"

namespace ctes {

/// Per-feature affine normalization (z-score) fitted on training rows.
struct Normalizer {
  VectorXd mean;
  VectorXd scale;

  /// Zero-variance features keep scale 1.
  static Normalizer fit(const MatrixXd& rows);

  /// N x d rows to a d x N normalized column batch.
  MatrixXd to_columns(const MatrixXd& rows) const;
  /// d x N normalized columns back to N x d rows at data scale.
  MatrixXd from_columns(const MatrixXd& cols) const;
};

struct TrainConfig {
  /// Weight of the (x, y_hat) term; 1 - beta weights the (x_hat, y) term.
  double beta = 0.9;
  int batch_size = 50;
  int iterations = 1000;
  int z_dim = 8;
  int hidden = 64;
  nn::OptimizerSettings optimizer{};
  int convergence_window = 50;
  double convergence_tol = 1e-4;
  /// Std-dev of Gaussian noise added to x at synthesis time (data scale).
  double jitter = 0.0;
  /// Apply the 3x3 mean filter to synthesized image expressions.
  bool smooth_images = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid values; returns warnings (beta <= 0.5).
  std::vector<std::string> validate() const;
};

/// G(z, x) = decoder(h1([z; x])). The decoder's last layer has no activation.
struct GeneratorModel {
  nn::Network<double> h1;
  nn::Network<double> decoder;
  int z_dim = 0;
  Normalizer x_norm;
  Normalizer y_norm;
  ImageShape image;

  Index char_dim() const { return x_norm.mean.size(); }
  Index expr_dim() const { return y_norm.mean.size(); }
};

/// D(x, y) = head([x; encoder(y)]); the head ends in a sigmoid.
struct DiscriminatorModel {
  nn::Network<double> encoder;
  nn::Network<double> head;
  Normalizer x_norm;
  Normalizer y_norm;
};

/// Values of the two maximized objectives at one iteration.
struct LossRecord {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

struct CtesModel {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  TrainConfig config;
  std::vector<LossRecord> losses;
  bool converged = false;
};

/// Layer lists for the generator (h1, decoder) and discriminator (encoder, head).
struct Architecture {
  std::vector<nn::LayerSpec> h1, decoder, encoder, head;
};

/// Three dense layers on each side for vector expressions; for images
/// (side divisible by 16) the decoder is four stride-2 transposed
/// convolutions and the encoder four stride-2 convolutions, 8-16-32-64 channels.
Architecture make_architecture(Index char_dim, Index expr_dim, const TrainConfig& cfg,
                               ImageShape image = {});

/// Randomly initialized model shaped for the dataset, with normalization
/// fitted on it. Used as the starting point of training.
CtesModel init_model(const PairedDataset& data, const TrainConfig& cfg);

VectorXd generator_forward(const GeneratorModel& gen, const VectorXd& z, const VectorXd& x);
double discriminator_forward(const DiscriminatorModel& disc, const VectorXd& x, const VectorXd& y);

inline constexpr double kProbabilityClamp = 1e-7;

/// log d_real + beta log(1 - d_fake_y) + (1 - beta) log(1 - d_fake_x), scores
/// clamped to [1e-7, 1 - 1e-7]. Training maximizes this for D.
double discriminator_loss(double d_real, double d_fake_y, double d_fake_x, double beta);

/// log d_fake_y (clamped). Training maximizes this for G.
double generator_loss(double d_fake_y);

/// For every batch row j, a uniformly drawn dataset row whose characteristic
/// vector differs from that of row batch[j].
std::vector<Index> sample_mismatch_rows(std::span<const Index> batch, const PairedDataset& data,
                                        Rng& rng);
MatrixXd sample_mismatch(std::span<const Index> batch, const PairedDataset& data, Rng& rng);

/// Everything the trainer saw at one iteration; scores are D outputs.
struct IterationRecord {
  std::size_t iteration = 0;
  std::span<const Index> batch;
  std::span<const Index> mismatch;
  Eigen::RowVectorXd d_real, d_fake_y, d_fake_x;
  LossRecord loss;
};

using TrainObserver = std::function<void(const IterationRecord&)>;

/// Alternating training: one discriminator step (maximize L_D) then one
/// generator step (maximize L_G) per iteration, stopping early when the
/// moving averages of |dL_D| and |dL_G| fall below the tolerance.
CtesModel train_ctes(const PairedDataset& data, const TrainConfig& cfg,
                     const TrainObserver& observer = {});

/// `count` expressions for one characteristic, each from a fresh z and, when
/// jitter > 0, a freshly perturbed copy of x.
MatrixXd synthesize(const CtesModel& model, const VectorXd& x, int count, Rng& rng,
                    double jitter = 0.0);

/// One expression per row of x_rows.
MatrixXd synthesize_rows(const CtesModel& model, const MatrixXd& x_rows, Rng& rng,
                         double jitter = 0.0);

/// Optimal discriminator and objective value on a finite support.
struct MinimaxOracle {
  VectorXd d_star;
  double value = 0.0;
};

/// D*(p) = p_data / (p_data + beta p_g + (1 - beta) p_prime), and the
/// objective sum p_data log D* + (beta p_g + (1 - beta) p_prime) log(1 - D*).
/// Points with zero total mass contribute nothing (D* reported as 0.5).
MinimaxOracle toy_minimax_oracle(const VectorXd& p_data, const VectorXd& p_g,
                                 const VectorXd& p_prime, double beta);

}  // namespace ctes

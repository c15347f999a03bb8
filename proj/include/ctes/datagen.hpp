#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctes/dataset.hpp"
#include "ctes/random.hpp"

namespace ctes {

// ---------------------------------------------------------------------------
// Multivariate study: two characteristics, six expressions.

struct SimConfig {
  double sigma = 0.01;
  int samples_per_group = 200;
  int groups = 5;
  double noise_std = 0.005;
  /// When true a single noise draw is shared by all six coordinates of a sample.
  bool shared_noise = false;
  std::uint64_t seed = 0;

  void validate() const;
};

using Expression6 = Eigen::Matrix<double, 6, 1>;

/// Maps (x1, x2) to the six expression variables. eps[m] perturbs both inputs
/// of output coordinate m: the first three coordinates are the order-0..2
/// Taylor terms 2^k/k! (x1 x2)^k exp(-x1^2 - x2^2), then x1^2, x2^2, x1*x2.
Expression6 expression_transform(double x1, double x2, const std::array<double, 6>& eps);

/// groups x samples_per_group rows; group i has x1, x2 ~ N(0.2 i, sigma^2).
PairedDataset gen_multivariate_dataset(const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Scalar-to-matrix study: Gaussian random fields on a pixel grid.

struct GpSimConfig {
  int side = 16;
  int images_per_category = 128;
  int categories = 5;
  /// Per-category length scales; empty means l_i = i.
  std::vector<double> length_scales;
  int char_dim = 64;
  double jitter = 1e-9;
  std::uint64_t seed = 0;

  double length_scale(int category) const;
  void validate() const;
};

/// Draws zero-mean fields with covariance
/// exp(-((r-r')^2 + (c-c')^2) / (2 l)) between pixels (r, c) and (r', c').
/// The covariance is separable, so a field is L_r Z L_c^T with Z standard
/// normal and L_r, L_c the Cholesky factors of the row and column kernels.
class GpSampler {
 public:
  GpSampler(int height, int width, double length_scale, double jitter = 1e-9);

  MatrixXd sample(Rng& rng) const;

  const MatrixXd& row_factor() const { return row_factor_; }
  const MatrixXd& col_factor() const { return col_factor_; }

  /// Dense (H*W) x (H*W) kernel over row-major pixel indices.
  static MatrixXd dense_kernel(int height, int width, double length_scale);

 private:
  MatrixXd row_factor_;
  MatrixXd col_factor_;
};

/// One field for the given category (1-based).
MatrixXd gp_sample(const GpSimConfig& cfg, int category, Rng& rng);

/// categories x images_per_category image rows, characteristics
/// v_q ~ N(20 l_i + q/10, 1) for q = 1..char_dim.
PairedDataset gen_scalar_to_matrix_dataset(const GpSimConfig& cfg);

// ---------------------------------------------------------------------------

struct Discretized {
  VectorXi bins;
  /// Fewer distinct values than bins; some bins are empty.
  bool degenerate = false;
};

/// Bins a column at its j/bins empirical quantiles (linear interpolation
/// between order statistics). A value equal to an edge goes to the lower bin.
Discretized quantile_discretize(std::span<const double> column, int bins = 6);

/// 3x3 mean filter with edge-replicating padding.
MatrixXd low_pass_filter(const MatrixXd& image);

/// Applies low_pass_filter to every row of a flattened image batch.
MatrixXd low_pass_filter_rows(const MatrixXd& rows, ImageShape shape);

// ---------------------------------------------------------------------------
// CSV: header x1..xm, y1..yn (or px_r_c), group[, outcome].

void write_csv(const PairedDataset& data, const std::string& path);
PairedDataset read_csv(const std::string& path);

/// 17 significant digits; reads back bit-exactly.
std::string format_double(double v);

}  // namespace ctes

namespace ctes {

/// Replaces every column with more distinct values than `bins` by its
/// quantile bin index; columns that are already coarse are left alone.
MatrixXd discretize_continuous_columns(const MatrixXd& data, int bins = 6);

}  // namespace ctes

#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace ctes {

/// Multi-output partial least squares fitted by NIPALS deflation.
struct PlsModel {
  int components = 0;
  Eigen::MatrixXd x_weights;   // W: m x a
  Eigen::MatrixXd x_loadings;  // P: m x a
  Eigen::MatrixXd y_loadings;  // Q: n x a
  Eigen::MatrixXd x_scores;    // T: N x a
  Eigen::RowVectorXd x_mean;
  Eigen::RowVectorXd y_mean;
  Eigen::MatrixXd coefficients;  // m x n, W (P^T W)^-1 Q^T
};

PlsModel pls_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int components);

/// One prediction per row of x.
Eigen::MatrixXd pls_predict(const PlsModel& model, const Eigen::MatrixXd& x);

/// Nadaraya-Watson kernel regression over the stored pairs.
struct GrnnModel {
  Eigen::MatrixXd inputs;   // N x m
  Eigen::MatrixXd targets;  // N x n
  double bandwidth = 1.0;
};

/// Stores the pairs; bandwidth defaults to the median pairwise input distance.
GrnnModel grnn_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   std::optional<double> bandwidth = std::nullopt);

/// y = sum_i y_i w_i / sum_i w_i with w_i = exp(-|x - x_i|^2 / (2 bandwidth^2)).
/// When every weight underflows, the nearest stored target is returned.
Eigen::MatrixXd grnn_predict(const GrnnModel& model, const Eigen::MatrixXd& x);

double median_pairwise_distance(const Eigen::MatrixXd& x);

enum class MethodKind { pls, grnn, cgan, gan_cls, ctes, se_ctes };

std::string to_string(MethodKind kind);
/// Throws ConfigError for unknown names.
MethodKind parse_method(const std::string& name);
bool is_gan(MethodKind kind);

/// Trainer settings that distinguish the adversarial variants. All other
/// training settings are shared.
struct VariantSettings {
  MethodKind kind = MethodKind::se_ctes;
  double beta = 0.9;
  bool ensemble = false;
  int k = 1;
  int h = 1;
};

VariantSettings variant_config(const std::string& name);

}  // namespace ctes

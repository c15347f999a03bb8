#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctes {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Pixel geometry of image-valued expressions; empty for vector expressions.
struct ImageShape {
  int height = 0;
  int width = 0;

  bool empty() const { return height == 0 || width == 0; }
  int pixels() const { return height * width; }
};

/// N row-aligned (characteristic, expression) samples with group labels.
/// Image expressions are stored flattened row-major, one image per row.
struct PairedDataset {
  MatrixXd characteristics;  // N x m
  MatrixXd expressions;      // N x n
  VectorXi groups;           // labels in [1, num_groups]
  int num_groups = 0;
  ImageShape image;
  std::optional<VectorXi> outcome;  // binary, for risk evaluation

  Index size() const { return characteristics.rows(); }
  Index char_dim() const { return characteristics.cols(); }
  Index expr_dim() const { return expressions.cols(); }

  /// Throws InputError when rows are misaligned or labels are out of range.
  void validate() const;

  std::vector<Index> rows_in_group(int group) const;
  PairedDataset subset(const std::vector<Index>& rows) const;
};

}  // namespace ctes

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctes/dataset.hpp"
#include "ctes/forest.hpp"

namespace ctes {

enum class ClassifierKind { forest, cnn };

/// Small convolutional classifier for image expressions: four stride-2
/// convolutions (8, 16, 32, 64 channels) and a dense softmax layer.
struct CnnClassifierConfig {
  int epochs = 15;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::forest;
  ForestConfig forest;
  CnnClassifierConfig cnn;
  ImageShape image;  // required for the cnn kind
};

/// Fits on (train_x, train_y) and labels every row of test_x. Labels are
/// arbitrary integers; at least two distinct labels are required.
VectorXi fit_predict(const ClassifierSpec& spec, const MatrixXd& train_x,
                     std::span<const int> train_y, const MatrixXd& test_x, std::uint64_t seed);

}  // namespace ctes

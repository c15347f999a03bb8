#include "ctes/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctes/errors.hpp"
#include "ctes/nn/network.hpp"
#include "ctes/nn/optimizer.hpp"
#include "ctes/random.hpp"

namespace ctes {

namespace {

std::vector<nn::LayerSpec> cnn_spec(ImageShape image, int classes) {
  if (image.height != image.width || image.height % 16 != 0)
    throw ConfigError("cnn classifier needs a square image with side divisible by 16");
  const int channels[] = {1, 8, 16, 32, 64};
  std::vector<nn::LayerSpec> spec;
  for (int j = 0; j < 4; ++j) {
    const int side = image.height >> j;
    spec.push_back(nn::conv2d({channels[j], channels[j + 1], side, side, 4, 2, 1},
                              nn::Activation::relu));
  }
  const int base = image.height / 16;
  spec.push_back(nn::dense(channels[4] * base * base, classes));
  return spec;
}

MatrixXd softmax_columns(const MatrixXd& logits) {
  MatrixXd p = logits;
  for (Index j = 0; j < p.cols(); ++j) {
    p.col(j).array() -= p.col(j).maxCoeff();
    p.col(j) = p.col(j).array().exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

VectorXi cnn_fit_predict(const ClassifierSpec& spec, const MatrixXd& train_x,
                         const std::vector<int>& class_of, int classes, const MatrixXd& test_x,
                         std::uint64_t seed) {
  if (train_x.cols() != spec.image.pixels())
    throw InputError("cnn classifier: rows have " + std::to_string(train_x.cols()) +
                     " values, image has " + std::to_string(spec.image.pixels()));
  const double mean = train_x.mean();
  const double sd = std::sqrt((train_x.array() - mean).square().mean());
  const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
  const MatrixXd xs = ((train_x.array() - mean) * scale).matrix().transpose();

  auto net = nn::init_params<double>(cnn_spec(spec.image, classes), seed);
  nn::OptimizerSettings opt;
  opt.learning_rate = spec.cnn.learning_rate;
  auto state = nn::make_opt_state(net, opt);
  Rng rng(derive_seed(seed, "cnn-batches"));

  const Index n = xs.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Index bs = std::max<Index>(1, spec.cnn.batch_size);
  for (int epoch = 0; epoch < spec.cnn.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += bs) {
      const Index len = std::min(bs, n - start);
      MatrixXd batch(xs.rows(), len);
      for (Index j = 0; j < len; ++j) batch.col(j) = xs.col(order[std::size_t(start + j)]);
      const auto trace = nn::forward(net, batch);
      MatrixXd grad = softmax_columns(trace.output());
      for (Index j = 0; j < len; ++j) grad(class_of[std::size_t(order[std::size_t(start + j)])], j) -= 1.0;
      grad /= double(len);
      nn::optimizer_step(net, nn::backprop(net, trace, grad), state);
    }
  }
  const MatrixXd logits =
      nn::forward(net, MatrixXd(((test_x.array() - mean) * scale).matrix().transpose())).output();
  VectorXi out(logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) {
    Index best;
    logits.col(j).maxCoeff(&best);
    out[j] = int(best);
  }
  return out;
}

}  // namespace

VectorXi fit_predict(const ClassifierSpec& spec, const MatrixXd& train_x,
                     std::span<const int> train_y, const MatrixXd& test_x, std::uint64_t seed) {
  if (train_x.rows() != Index(train_y.size()))
    throw InputError("classifier: features and labels are not aligned");
  if (test_x.cols() != train_x.cols())
    throw InputError("classifier: test rows have " + std::to_string(test_x.cols()) +
                     " features, training rows have " + std::to_string(train_x.cols()));
  if (spec.kind == ClassifierKind::forest) {
    ForestConfig cfg = spec.forest;
    cfg.seed = seed;
    return predict_forest(fit_forest(train_x, train_y, cfg), test_x);
  }
  std::vector<int> labels(train_y.begin(), train_y.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() < 2) throw InputError("classifier: need at least two classes");
  std::vector<int> class_of(train_y.size());
  for (std::size_t i = 0; i < train_y.size(); ++i)
    class_of[i] = int(std::lower_bound(labels.begin(), labels.end(), train_y[i]) - labels.begin());
  const VectorXi idx = cnn_fit_predict(spec, train_x, class_of, int(labels.size()), test_x, seed);
  VectorXi out(idx.size());
  for (Index i = 0; i < idx.size(); ++i) out[i] = labels[std::size_t(idx[i])];
  return out;
}

}  // namespace ctes

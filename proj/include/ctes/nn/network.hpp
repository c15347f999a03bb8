#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctes/errors.hpp"
#include "ctes/nn/layer.hpp"

namespace ctes::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};

/// Layer-structured parameters together with the spec that shaped them.
/// Samples are columns: a batch of B inputs is an input_size() x B matrix.
/// Images are flattened channel-major (channel, row, column).
template <typename Scalar>
struct Network {
  std::vector<LayerSpec> spec;
  std::vector<LayerParams<Scalar>> layers;

  int input_size() const { return spec.front().input_size(); }
  int output_size() const { return spec.back().output_size(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
};

/// Activations of every layer for one forward pass; activations[0] is the input.
template <typename Scalar>
struct Trace {
  std::vector<Matrix<Scalar>> activations;

  const Matrix<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar>
struct Gradients {
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> input;
};

namespace detail {

inline constexpr double kSigmoidClamp = 30.0;

template <typename Scalar>
void activate(Activation act, Eigen::Ref<Matrix<Scalar>> z) {
  switch (act) {
    case Activation::none:
      break;
    case Activation::relu:
      z = z.cwiseMax(Scalar(0));
      break;
    case Activation::sigmoid:
      z = z.unaryExpr([](Scalar v) {
        const Scalar c = std::clamp(v, Scalar(-kSigmoidClamp), Scalar(kSigmoidClamp));
        return Scalar(1) / (Scalar(1) + std::exp(-c));
      });
      break;
  }
}

// Multiplies the upstream gradient by the activation derivative, expressed in
// terms of the activation output.
template <typename Scalar>
Matrix<Scalar> activation_backward(Activation act, const Matrix<Scalar>& out,
                                   const Matrix<Scalar>& grad) {
  switch (act) {
    case Activation::none:
      return grad;
    case Activation::relu:
      return (out.array() > Scalar(0)).select(grad.array(), Scalar(0)).matrix();
    case Activation::sigmoid:
      return (grad.array() * out.array() * (Scalar(1) - out.array())).matrix();
  }
  return grad;
}

/// Unfolds one channel-major image into a (channels*k*k) x (oh*ow) patch matrix.
template <typename Scalar>
Matrix<Scalar> im2col(const Scalar* img, int channels, int height, int width,
                      int kernel, int stride, int padding, int oh, int ow) {
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(channels * kernel * kernel, oh * ow);
  for (int c = 0; c < channels; ++c)
    for (int ki = 0; ki < kernel; ++ki)
      for (int kj = 0; kj < kernel; ++kj) {
        const int row = (c * kernel + ki) * kernel + kj;
        for (int orow = 0; orow < oh; ++orow) {
          const int r = orow * stride - padding + ki;
          if (r < 0 || r >= height) continue;
          for (int ocol = 0; ocol < ow; ++ocol) {
            const int q = ocol * stride - padding + kj;
            if (q < 0 || q >= width) continue;
            cols(row, orow * ow + ocol) = img[(c * height + r) * width + q];
          }
        }
      }
  return cols;
}

/// Adjoint of im2col: accumulates patch values back into the image buffer.
template <typename Scalar>
void col2im(const Matrix<Scalar>& cols, int channels, int height, int width,
            int kernel, int stride, int padding, int oh, int ow, Scalar* img) {
  for (int c = 0; c < channels; ++c)
    for (int ki = 0; ki < kernel; ++ki)
      for (int kj = 0; kj < kernel; ++kj) {
        const int row = (c * kernel + ki) * kernel + kj;
        for (int orow = 0; orow < oh; ++orow) {
          const int r = orow * stride - padding + ki;
          if (r < 0 || r >= height) continue;
          for (int ocol = 0; ocol < ow; ++ocol) {
            const int q = ocol * stride - padding + kj;
            if (q < 0 || q >= width) continue;
            img[(c * height + r) * width + q] += cols(row, orow * ow + ocol);
          }
        }
      }
}

template <typename Scalar>
Matrix<Scalar> layer_linear(const LayerSpec& s, const LayerParams<Scalar>& p,
                            const Matrix<Scalar>& in) {
  const Eigen::Index batch = in.cols();
  if (s.kind == LayerKind::dense) {
    Matrix<Scalar> out = p.weight * in;
    out.colwise() += p.bias;
    return out;
  }
  const auto& g = s.conv;
  const int oh = s.out_height(), ow = s.out_width();
  Matrix<Scalar> out(s.output_size(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    Eigen::Map<RowMajorMatrix<Scalar>> y(out.col(b).data(), g.out_channels, oh * ow);
    if (s.kind == LayerKind::conv2d) {
      const Matrix<Scalar> cols = im2col<Scalar>(in.col(b).data(), g.in_channels, g.in_height,
                                                 g.in_width, g.kernel, g.stride, g.padding, oh, ow);
      y.noalias() = p.weight * cols;
    } else {
      Eigen::Map<const RowMajorMatrix<Scalar>> x(in.col(b).data(), g.in_channels,
                                                 g.in_height * g.in_width);
      const Matrix<Scalar> cols = p.weight.transpose() * x;
      y.setZero();
      col2im<Scalar>(cols, g.out_channels, oh, ow, g.kernel, g.stride, g.padding, g.in_height,
                     g.in_width, y.data());
    }
    y.colwise() += p.bias;
  }
  return out;
}

// Backward through the linear part given the pre-activation gradient dz.
// Accumulates parameter gradients into `pg` and returns the input gradient.
template <typename Scalar>
Matrix<Scalar> layer_linear_backward(const LayerSpec& s, const LayerParams<Scalar>& p,
                                     const Matrix<Scalar>& in, const Matrix<Scalar>& dz,
                                     LayerParams<Scalar>& pg) {
  if (s.kind == LayerKind::dense) {
    pg.weight.noalias() = dz * in.transpose();
    pg.bias = dz.rowwise().sum();
    return p.weight.transpose() * dz;
  }
  const auto& g = s.conv;
  const int oh = s.out_height(), ow = s.out_width();
  pg.weight.setZero(p.weight.rows(), p.weight.cols());
  pg.bias.setZero(p.bias.size());
  Matrix<Scalar> din = Matrix<Scalar>::Zero(in.rows(), in.cols());
  for (Eigen::Index b = 0; b < in.cols(); ++b) {
    Eigen::Map<const RowMajorMatrix<Scalar>> dy(dz.col(b).data(), g.out_channels, oh * ow);
    pg.bias += dy.rowwise().sum();
    if (s.kind == LayerKind::conv2d) {
      const Matrix<Scalar> cols = im2col<Scalar>(in.col(b).data(), g.in_channels, g.in_height,
                                                 g.in_width, g.kernel, g.stride, g.padding, oh, ow);
      pg.weight.noalias() += dy * cols.transpose();
      const Matrix<Scalar> dcols = p.weight.transpose() * dy;
      col2im<Scalar>(dcols, g.in_channels, g.in_height, g.in_width, g.kernel, g.stride,
                     g.padding, oh, ow, din.col(b).data());
    } else {
      Eigen::Map<const RowMajorMatrix<Scalar>> x(in.col(b).data(), g.in_channels,
                                                 g.in_height * g.in_width);
      const Matrix<Scalar> dcols = im2col<Scalar>(dz.col(b).data(), g.out_channels, oh, ow,
                                                  g.kernel, g.stride, g.padding, g.in_height,
                                                  g.in_width);
      pg.weight.noalias() += x * dcols.transpose();
      Eigen::Map<RowMajorMatrix<Scalar>> dx(din.col(b).data(), g.in_channels,
                                            g.in_height * g.in_width);
      dx.noalias() = p.weight * dcols;
    }
  }
  return din;
}

}  // namespace detail

/// Uniform fan-based initialization: weights in [-a, a] with
/// a = sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic in `seed`.
template <typename Scalar = double>
Network<Scalar> init_params(std::vector<LayerSpec> spec, std::uint64_t seed) {
  validate_spec(spec);
  std::mt19937_64 rng(seed);
  Network<Scalar> net;
  net.layers.reserve(spec.size());
  for (const auto& l : spec) {
    const double bound = std::sqrt(6.0 / double(l.fan_in() + l.fan_out()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LayerParams<Scalar> p;
    p.weight.resize(l.weight_rows(), l.weight_cols());
    for (Eigen::Index j = 0; j < p.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < p.weight.rows(); ++i) p.weight(i, j) = Scalar(dist(rng));
    p.bias = Vector<Scalar>::Zero(l.bias_size());
    net.layers.push_back(std::move(p));
  }
  net.spec = std::move(spec);
  return net;
}

/// All-zero parameters for the given spec.
template <typename Scalar = double>
Network<Scalar> zero_params(std::vector<LayerSpec> spec) {
  validate_spec(spec);
  Network<Scalar> net;
  for (const auto& l : spec)
    net.layers.push_back({Matrix<Scalar>::Zero(l.weight_rows(), l.weight_cols()),
                          Vector<Scalar>::Zero(l.bias_size())});
  net.spec = std::move(spec);
  return net;
}

template <typename Scalar>
Trace<Scalar> forward(const Network<Scalar>& net, const Matrix<Scalar>& input) {
  if (input.rows() != net.input_size())
    throw InputError("forward: input has " + std::to_string(input.rows()) +
                     " rows, network expects " + std::to_string(net.input_size()));
  Trace<Scalar> trace;
  trace.activations.reserve(net.spec.size() + 1);
  trace.activations.push_back(input);
  for (std::size_t j = 0; j < net.spec.size(); ++j) {
    Matrix<Scalar> a = detail::layer_linear(net.spec[j], net.layers[j], trace.activations.back());
    detail::activate<Scalar>(net.spec[j].activation, a);
    trace.activations.push_back(std::move(a));
  }
  return trace;
}

/// Reverse-mode gradients of sum(out_grad .* output) with respect to every
/// parameter and to the input.
template <typename Scalar>
Gradients<Scalar> backprop(const Network<Scalar>& net, const Trace<Scalar>& trace,
                           const Matrix<Scalar>& out_grad) {
  const std::size_t depth = net.spec.size();
  if (trace.activations.size() != depth + 1)
    throw InputError("backprop: trace depth does not match network");
  for (std::size_t j = 0; j <= depth; ++j) {
    const int expected = j == 0 ? net.input_size() : net.spec[j - 1].output_size();
    if (trace.activations[j].rows() != expected ||
        trace.activations[j].cols() != trace.activations[0].cols())
      throw InputError("backprop: trace activation " + std::to_string(j) + " has wrong shape");
  }
  if (out_grad.rows() != trace.output().rows() || out_grad.cols() != trace.output().cols())
    throw InputError("backprop: output gradient shape does not match trace output");

  Gradients<Scalar> grads;
  grads.layers.resize(depth);
  Matrix<Scalar> g = out_grad;
  for (std::size_t j = depth; j-- > 0;) {
    const Matrix<Scalar> dz =
        detail::activation_backward<Scalar>(net.spec[j].activation, trace.activations[j + 1], g);
    g = detail::layer_linear_backward(net.spec[j], net.layers[j], trace.activations[j], dz,
                                      grads.layers[j]);
  }
  grads.input = std::move(g);
  return grads;
}

template <typename Scalar>
bool all_finite(const Network<Scalar>& net) {
  for (const auto& l : net.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

/// In-place sum of two gradient structures of identical shape.
template <typename Scalar>
void accumulate(Gradients<Scalar>& into, const Gradients<Scalar>& g) {
  if (into.layers.empty()) {
    into = g;
    return;
  }
  for (std::size_t j = 0; j < into.layers.size(); ++j) {
    into.layers[j].weight += g.layers[j].weight;
    into.layers[j].bias += g.layers[j].bias;
  }
}

}  // namespace ctes::nn

#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctes/errors.hpp"

namespace ctes::nn {

enum class LayerKind { dense, conv2d, conv_transpose2d };
enum class Activation { none, relu, sigmoid };

/// Geometry of a 2-D (transposed) convolution over channel-major images.
/// For conv2d the output side is (in + 2*padding - kernel) / stride + 1;
/// for the transposed form it is (in - 1) * stride - 2*padding + kernel.
struct ConvGeometry {
  int in_channels = 1;
  int out_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
};

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int inputs = 0;   // dense only
  int outputs = 0;  // dense only
  ConvGeometry conv{};
  Activation activation = Activation::none;

  int out_height() const {
    const auto& g = conv;
    return kind == LayerKind::conv2d
               ? (g.in_height + 2 * g.padding - g.kernel) / g.stride + 1
               : (g.in_height - 1) * g.stride - 2 * g.padding + g.kernel;
  }
  int out_width() const {
    const auto& g = conv;
    return kind == LayerKind::conv2d
               ? (g.in_width + 2 * g.padding - g.kernel) / g.stride + 1
               : (g.in_width - 1) * g.stride - 2 * g.padding + g.kernel;
  }

  int input_size() const {
    return kind == LayerKind::dense
               ? inputs
               : conv.in_channels * conv.in_height * conv.in_width;
  }
  int output_size() const {
    return kind == LayerKind::dense
               ? outputs
               : conv.out_channels * out_height() * out_width();
  }

  int weight_rows() const {
    switch (kind) {
      case LayerKind::dense: return outputs;
      case LayerKind::conv2d: return conv.out_channels;
      case LayerKind::conv_transpose2d: return conv.in_channels;
    }
    return 0;
  }
  int weight_cols() const {
    const int kk = conv.kernel * conv.kernel;
    switch (kind) {
      case LayerKind::dense: return inputs;
      case LayerKind::conv2d: return conv.in_channels * kk;
      case LayerKind::conv_transpose2d: return conv.out_channels * kk;
    }
    return 0;
  }
  int bias_size() const {
    return kind == LayerKind::dense ? outputs : conv.out_channels;
  }

  int fan_in() const {
    return kind == LayerKind::dense
               ? inputs
               : conv.in_channels * conv.kernel * conv.kernel;
  }
  int fan_out() const {
    return kind == LayerKind::dense
               ? outputs
               : conv.out_channels * conv.kernel * conv.kernel;
  }
};

inline LayerSpec dense(int inputs, int outputs, Activation act = Activation::none) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.inputs = inputs;
  s.outputs = outputs;
  s.activation = act;
  return s;
}

inline LayerSpec conv2d(ConvGeometry g, Activation act = Activation::none) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.conv = g;
  s.activation = act;
  return s;
}

inline LayerSpec conv_transpose2d(ConvGeometry g, Activation act = Activation::none) {
  LayerSpec s;
  s.kind = LayerKind::conv_transpose2d;
  s.conv = g;
  s.activation = act;
  return s;
}

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv_transpose2d: return "conv_transpose2d";
  }
  return "?";
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

/// Throws ConfigError unless the layer list is non-empty, every layer has a
/// positive geometry, adjacent layers agree on size, and sigmoid is used only
/// on the final (probability) layer.
inline void validate_spec(std::span<const LayerSpec> spec) {
  if (spec.empty()) throw ConfigError("network spec is empty");
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& l = spec[j];
    const std::string where = "layer " + std::to_string(j) + " (" + to_string(l.kind) + ")";
    if (l.kind == LayerKind::dense) {
      if (l.inputs <= 0 || l.outputs <= 0)
        throw ConfigError(where + ": dense sizes must be positive");
    } else {
      const auto& g = l.conv;
      if (g.in_channels <= 0 || g.out_channels <= 0 || g.in_height <= 0 ||
          g.in_width <= 0 || g.kernel <= 0 || g.stride <= 0 || g.padding < 0)
        throw ConfigError(where + ": invalid convolution geometry");
      if (l.out_height() <= 0 || l.out_width() <= 0)
        throw ConfigError(where + ": convolution output would be empty");
      if (l.kind == LayerKind::conv2d &&
          ((g.in_height + 2 * g.padding - g.kernel) % g.stride != 0 ||
           (g.in_width + 2 * g.padding - g.kernel) % g.stride != 0))
        throw ConfigError(where + ": stride does not tile the padded input");
    }
    if (l.activation == Activation::sigmoid && j + 1 != spec.size())
      throw ConfigError(where + ": sigmoid is reserved for the output layer");
    if (j > 0 && spec[j - 1].output_size() != l.input_size())
      throw ConfigError(where + ": input size " + std::to_string(l.input_size()) +
                        " does not match previous output size " +
                        std::to_string(spec[j - 1].output_size()));
  }
}

}  // namespace ctes::nn

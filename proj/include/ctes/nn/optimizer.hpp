#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctes/errors.hpp"
#include "ctes/nn/network.hpp"

namespace ctes::nn {

enum class OptimizerKind { adam, sgd };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// A gradient or updated parameter is NaN or infinite.
class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

template <typename Scalar>
struct OptState {
  OptimizerSettings settings;
  std::int64_t step = 0;
  std::vector<LayerParams<Scalar>> first_moment;
  std::vector<LayerParams<Scalar>> second_moment;
};

template <typename Scalar>
OptState<Scalar> make_opt_state(const Network<Scalar>& net, OptimizerSettings settings = {}) {
  OptState<Scalar> st;
  st.settings = settings;
  for (const auto& l : net.layers) {
    LayerParams<Scalar> z{Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                          Vector<Scalar>::Zero(l.bias.size())};
    st.first_moment.push_back(z);
    st.second_moment.push_back(std::move(z));
  }
  return st;
}

namespace detail {

template <typename Scalar, typename Param>
void adam_update(Param& w, const Param& g, Param& m, Param& v, const OptimizerSettings& s,
                 double bias1, double bias2) {
  m = Scalar(s.beta1) * m + Scalar(1 - s.beta1) * g;
  v = Scalar(s.beta2) * v + Scalar(1 - s.beta2) * g.cwiseAbs2();
  const Scalar lr = Scalar(s.learning_rate);
  w.array() -= lr * (m.array() / Scalar(bias1)) /
               ((v.array() / Scalar(bias2)).sqrt() + Scalar(s.epsilon));
}

}  // namespace detail

/// One optimizer update in place. Throws NonFiniteGradient before touching
/// the parameters if any gradient entry is not finite, and after the update
/// if a parameter became non-finite.
template <typename Scalar>
void optimizer_step(Network<Scalar>& net, const Gradients<Scalar>& grads, OptState<Scalar>& st) {
  if (grads.layers.size() != net.layers.size() || st.first_moment.size() != net.layers.size())
    throw InputError("optimizer_step: gradient/state structure does not match network");
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& g = grads.layers[j];
    if (g.weight.rows() != net.layers[j].weight.rows() ||
        g.weight.cols() != net.layers[j].weight.cols() ||
        g.bias.size() != net.layers[j].bias.size())
      throw InputError("optimizer_step: gradient shape mismatch at layer " + std::to_string(j));
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw NonFiniteGradient("non-finite gradient at layer " + std::to_string(j));
  }

  ++st.step;
  const auto& s = st.settings;
  const double bias1 = 1.0 - std::pow(s.beta1, double(st.step));
  const double bias2 = 1.0 - std::pow(s.beta2, double(st.step));
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    auto& p = net.layers[j];
    const auto& g = grads.layers[j];
    if (s.kind == OptimizerKind::sgd) {
      p.weight -= Scalar(s.learning_rate) * g.weight;
      p.bias -= Scalar(s.learning_rate) * g.bias;
    } else {
      detail::adam_update<Scalar>(p.weight, g.weight, st.first_moment[j].weight,
                                  st.second_moment[j].weight, s, bias1, bias2);
      detail::adam_update<Scalar>(p.bias, g.bias, st.first_moment[j].bias,
                                  st.second_moment[j].bias, s, bias1, bias2);
    }
  }
  if (!all_finite(net)) throw NonFiniteGradient("parameters became non-finite after update");
}

}  // namespace ctes::nn

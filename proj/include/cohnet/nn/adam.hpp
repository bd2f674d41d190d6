#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cohnet/nn/network.hpp"

namespace cohnet::nn {

struct AdamConfig {
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Length of the linear learning-rate ramp, in optimizer steps.
  std::int64_t total_steps = 1;

  double learning_rate(std::int64_t step) const {
    if (total_steps <= 1) return lr_start;
    const double t = std::min<double>(1.0, static_cast<double>(step) / (total_steps - 1));
    return lr_start + (lr_end - lr_start) * t;
  }
};

template <typename S>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor<S>> m_weight, v_weight, m_bias, v_bias;

  AdamState(const Network<S>& net, AdamConfig cfg) : config(cfg) {
    for (const auto& l : net.layers()) {
      m_weight.push_back(Tensor<S>::zeros_like(l.weight));
      v_weight.push_back(Tensor<S>::zeros_like(l.weight));
      m_bias.push_back(Tensor<S>::zeros_like(l.bias));
      v_bias.push_back(Tensor<S>::zeros_like(l.bias));
    }
  }

  double current_lr() const { return config.learning_rate(step); }
};

namespace detail {

template <typename S>
void adam_update(Tensor<S>& p, const Tensor<S>& g, Tensor<S>& m, Tensor<S>& v,
                 const AdamConfig& c, double lr, double corr1, double corr2) {
  if (g.shape != p.shape || m.shape != p.shape)
    fail(ErrorKind::ShapeMismatch, "Adam: gradient shape " + shape_string(g.shape) +
                                       " does not match parameter " + shape_string(p.shape));
  const S b1 = static_cast<S>(c.beta1), b2 = static_cast<S>(c.beta2);
  m.data = b1 * m.data + (S(1) - b1) * g.data;
  v.data = b2 * v.data + (S(1) - b2) * g.data.square();
  const S step = static_cast<S>(lr / corr1);
  const S root_corr2 = static_cast<S>(std::sqrt(corr2));
  p.data -= step * m.data / ((v.data.sqrt() / root_corr2) + static_cast<S>(c.epsilon));
}

}  // namespace detail

/// One bias-corrected Adam update at the scheduled learning rate.
template <typename S>
void adam_step(AdamState<S>& state, Network<S>& net, const Gradients<S>& grads) {
  if (net.frozen()) fail(ErrorKind::InvalidArgument, "cannot apply Adam to a frozen network");
  if (grads.weight.size() != net.size())
    fail(ErrorKind::ShapeMismatch, "Adam: gradient layer count does not match network");
  const double lr = state.current_lr();
  state.step += 1;
  const double corr1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layers()[i];
    if (!l.has_params()) continue;
    detail::adam_update(l.weight, grads.weight[i], state.m_weight[i], state.v_weight[i],
                        state.config, lr, corr1, corr2);
    detail::adam_update(l.bias, grads.bias[i], state.m_bias[i], state.v_bias[i], state.config,
                        lr, corr1, corr2);
  }
}

}  // namespace cohnet::nn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "cohnet/fileutil.hpp"
#include "cohnet/nn/network.hpp"
#include "cohnet/pipeline.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cohnet_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Worst relative error between analytic parameter gradients and central
/// differences of `loss` over every parameter of `net`. The floor tracks the
/// roundoff of a central difference, about eps * |loss| / h.
inline double max_param_fd_error(cohnet::nn::Network<double>& net,
                                 const cohnet::nn::Gradients<double>& analytic,
                                 const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  const double floor = std::max(1e-8, 1e-7 * std::abs(loss()));
  for (std::size_t li = 0; li < net.size(); ++li) {
    auto& layer = net.layers()[li];
    if (!layer.has_params()) continue;
    for (int which = 0; which < 2; ++which) {
      auto& p = which == 0 ? layer.weight : layer.bias;
      const auto& g = which == 0 ? analytic.weight[li] : analytic.bias[li];
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double keep = p.data[k];
        p.data[k] = keep + h;
        const double up = loss();
        p.data[k] = keep - h;
        const double down = loss();
        p.data[k] = keep;
        worst = std::max(worst, rel_error((up - down) / (2 * h), g.data[k], floor));
      }
    }
  }
  return worst;
}

/// Scalar probe loss sum(r * y) with fixed random weights r, so the upstream
/// gradient of the network output is r.
struct Probe {
  cohnet::nn::Tensor<double> r;

  Probe(const cohnet::nn::Shape& shape, std::uint64_t seed) : r(shape) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data[i] = u(eng);
  }
  double operator()(const cohnet::nn::Tensor<double>& y) const { return (r.data * y.data).sum(); }
};

inline cohnet::nn::Tensor<double> random_tensor(const cohnet::nn::Shape& shape, std::uint64_t seed,
                                                double lo = -1.0, double hi = 1.0) {
  cohnet::nn::Tensor<double> t(shape);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = u(eng);
  return t;
}

/// Worst relative error of the input gradient against central differences.
inline double max_input_fd_error(const cohnet::nn::Network<double>& net,
                                 cohnet::nn::Tensor<double> x, const Probe& probe,
                                 double h = 1e-5) {
  cohnet::nn::Tape<double> tape;
  const auto y = net.forward(x, &tape);
  const auto back = net.backward(tape, probe.r);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double keep = x.data[k];
    x.data[k] = keep + h;
    const double up = probe(net.forward(x));
    x.data[k] = keep - h;
    const double down = probe(net.forward(x));
    x.data[k] = keep;
    worst = std::max(worst, rel_error((up - down) / (2 * h), back.input_grad.data[k]));
  }
  return worst;
}

/// Parameter-gradient check of `net` on input x with a probe loss.
inline double max_layer_fd_error(cohnet::nn::Network<double>& net,
                                 const cohnet::nn::Tensor<double>& x, const Probe& probe) {
  cohnet::nn::Tape<double> tape;
  net.forward(x, &tape);
  const auto back = net.backward(tape, probe.r);
  if (!back.params) return 0.0;
  return max_param_fd_error(net, *back.params, [&] { return probe(net.forward(x)); });
}

/// Small nonzero biases, so no pre-activation sits exactly on a ReLU kink
/// (zero biases leave dead receptive fields at exactly 0).
inline void jitter_biases(cohnet::nn::Network<double>& net, std::uint64_t seed) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layers()[i];
    if (l.has_params()) l.bias = random_tensor(l.bias.shape, seed + i, -0.1, 0.1);
  }
}

inline std::string hash_file(const fs::path& p) {
  const auto bytes = cohnet::read_file(p);
  return std::to_string(cohnet::fnv1a64(bytes));
}

/// 8x8 toy batch: random coherence, constant kz, reference heights with a
/// few masked pixels.
inline std::vector<cohnet::PatchSample> toy_batch(int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<cohnet::PatchSample> out;
  for (int s = 0; s < n; ++s) {
    cohnet::Grid<float> g(8, 8), h(8, 8);
    cohnet::Mask m = cohnet::Mask::Constant(8, 8, true);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      g.data()[i] = 0.2f + 0.7f * u(eng);
      h.data()[i] = 5.0f + 40.0f * u(eng);
      m.data()[i] = u(eng) > 0.15f;
    }
    const float kz = 0.06f + 0.06f * u(eng);
    out.push_back({cohnet::ScalarRaster(g), cohnet::ScalarRaster(8, 8, kz), cohnet::ScalarRaster(h), m});
  }
  return out;
}

/// Finite-difference check of d(loss)/d(first-net parameters) through a
/// frozen surrogate, in double precision, on an 8x8 toy pipeline.
inline double pipeline_fd_error(std::uint64_t seed, cohnet::LossKind kind = cohnet::LossKind::BatchRmse) {
  using namespace cohnet;
  auto first = nn::build_unet<double>(2, 2, 2, nn::OutActivation::Sigmoid);
  nn::init_weights(first, seed);
  jitter_biases(first, seed + 100);
  auto nsm = nn::build_mlp<double>(2, {6, 6}, 1, nn::OutActivation::Identity);
  nn::init_weights(nsm, seed + 1);
  nsm.freeze();
  const auto batch = toy_batch(2, seed + 2);
  const auto g = pipeline_gradient(first, nsm, kKzScale, kDefaultHeightMax, batch, kind);
  return max_param_fd_error(first, g.first_net, [&] {
    return pipeline_gradient(first, nsm, kKzScale, kDefaultHeightMax, batch, kind).loss;
  });
}

}  // namespace testing

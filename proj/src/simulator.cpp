#include "cohnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cohnet/random.hpp"

namespace cohnet {

namespace {

enum Stream : std::uint64_t { kHeightNoise = 1, kForestNoise = 2, kWavenumber = 3 };

Grid<double> white_noise(int h, int w, Rng& rng) {
  Grid<double> g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  return g;
}

}  // namespace

void SimConfig::validate() const {
  require(width > 0 && height > 0, "scene dimensions must be positive");
  require(h_max > 0.0, "h_max must be positive");
  require(mean_height >= 0.0 && mean_height <= h_max, "mean height outside [0, h_max]");
  require(height_spread >= 0.0, "height spread must be >= 0");
  require(correlation_length >= 0.0, "correlation length must be >= 0");
  require(forest_fraction >= 0.0 && forest_fraction <= 1.0, "forest fraction outside [0, 1]");
  require(kz_min > 0.0 && kz_min <= kz_max, "kz range must be positive and ordered");
  require(sigma >= 0.0 && mu >= 0.0, "extinction and ground ratio must be >= 0");
  budget.validate();
}

Grid<double> gaussian_blur_periodic(const Grid<double>& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    ksum += k[i + radius];
  }
  for (double& v : k) v /= ksum;

  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  Grid<double> tmp = Grid<double>::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * in(r, wrap(c + i, w));
      tmp(r, c) = s;
    }
  Grid<double> out = Grid<double>::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(wrap(r + i, h), c);
      out(r, c) = s;
    }
  return out;
}

HeightField synth_height_field(const SimConfig& config) {
  config.validate();
  const int h = config.height;
  const int w = config.width;

  Rng forest_rng(config.seed, kForestNoise);
  const Grid<double> forest_field =
      gaussian_blur_periodic(white_noise(h, w, forest_rng), config.correlation_length);
  const auto n = static_cast<std::size_t>(forest_field.size());
  const auto n_forest = static_cast<std::size_t>(std::llround(config.forest_fraction * n));
  Mask forest = Mask::Constant(h, w, false);
  if (n_forest > 0) {
    std::vector<double> sorted(forest_field.data(), forest_field.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + (n - n_forest), sorted.end());
    const double threshold = sorted[n - n_forest];
    forest = forest_field >= threshold;
  }

  Rng height_rng(config.seed, kHeightNoise);
  const Grid<double> field =
      gaussian_blur_periodic(white_noise(h, w, height_rng), config.correlation_length);
  const double count = std::max<double>(1.0, static_cast<double>(forest.count()));
  const double mean = forest.select(field, 0.0).sum() / count;
  const double var = forest.select((field - mean).square(), 0.0).sum() / count;
  const double sd = std::sqrt(var);

  Grid<float> heights = Grid<float>::Zero(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!forest(r, c)) continue;
      const double z = sd > 0.0 ? (field(r, c) - mean) / sd : 0.0;
      const double v = config.mean_height + config.height_spread * z;
      heights(r, c) = static_cast<float>(std::clamp(v, std::min(2.0, config.h_max), config.h_max));
    }
  }
  return {ScalarRaster(std::move(heights)), std::move(forest)};
}

SyntheticScene make_scene(const SimConfig& config) {
  auto field = synth_height_field(config);
  Rng kz_rng(config.seed, kWavenumber);
  const double kz = kz_rng.uniform(config.kz_min, config.kz_max);
  const double top = ambiguity_height(kz) - kAmbiguityMargin;

  const int h = config.height;
  const int w = config.width;
  Grid<float> heights = field.heights.values().min(static_cast<float>(top));
  Grid<std::complex<float>> gamma(h, w);
  const double scale = config.budget.product();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const RvogParams p(heights(r, c), kz, config.sigma, config.mu, config.z0, config.theta);
      gamma(r, c) = std::complex<float>(scale * rvog_total_coherence(p));
    }
  }
  SyntheticScene scene;
  scene.height_map = ScalarRaster(std::move(heights));
  scene.forest_mask = std::move(field.forest);
  scene.kz_map = ScalarRaster(w, h, static_cast<float>(kz));
  scene.true_gamma = ComplexRaster(std::move(gamma));
  scene.config = config;
  scene.kz = kz;
  return scene;
}

SlcPair simulate_slc_pair(const SyntheticScene& scene, std::uint64_t seed) {
  const int h = scene.true_gamma.height();
  const int w = scene.true_gamma.width();
  Rng rng(seed, 0);
  Grid<std::complex<float>> s1(h, w), s2(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::complex<double> g = scene.true_gamma(r, c);
      const auto n1 = rng.complex_normal();
      const auto n2 = rng.complex_normal();
      const double rest = std::sqrt(std::max(0.0, 1.0 - std::norm(g)));
      s1(r, c) = std::complex<float>(n1);
      s2(r, c) = std::complex<float>(std::conj(g) * n1 + rest * n2);
    }
  }
  return {ComplexRaster(std::move(s1), scene.true_gamma.valid()),
          ComplexRaster(std::move(s2), scene.true_gamma.valid())};
}

ScalarRaster make_reference_heights(const SyntheticScene& scene, double noise_std,
                                    std::uint64_t seed) {
  require(noise_std >= 0.0, "reference noise must be >= 0");
  Rng rng(seed, 0);
  const auto& truth = scene.height_map;
  Grid<float> v = Grid<float>::Zero(truth.height(), truth.width());
  for (int r = 0; r < truth.height(); ++r) {
    for (int c = 0; c < truth.width(); ++c) {
      if (!scene.forest_mask(r, c)) continue;
      const double noisy = truth(r, c) + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
      v(r, c) = static_cast<float>(std::max(0.0, noisy));
    }
  }
  return ScalarRaster(std::move(v), scene.forest_mask);
}

}  // namespace cohnet

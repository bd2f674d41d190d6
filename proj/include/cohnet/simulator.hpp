#pragma once

#include <cstdint>

#include "cohnet/coherence.hpp"
#include "cohnet/raster.hpp"
#include "cohnet/rvog.hpp"

namespace cohnet {

/// Synthetic forest scene parameters.
struct SimConfig {
  std::uint64_t seed = 1;
  int width = 256;
  int height = 256;
  double mean_height = 33.0;  // m
  double height_spread = 10.0;  // m
  double h_max = 60.0;  // m
  double correlation_length = 24.0;  // px
  double forest_fraction = 0.85;
  double kz_min = 0.06;  // rad/m
  double kz_max = 0.12;  // rad/m
  DecorrelationBudget budget{0.9, 0.97, 0.97, 1.0, 1.0};
  double sigma = 0.0;
  double theta = kDefaultIncidence;
  double mu = 0.0;
  double z0 = 0.0;

  void validate() const;
};

/// Heights are kept this far below the height of ambiguity so that every
/// forest pixel stays on the first sinc branch.
inline constexpr double kAmbiguityMargin = 0.5;  // m

struct HeightField {
  ScalarRaster heights;
  Mask forest;
};

struct SyntheticScene {
  ScalarRaster height_map;
  Mask forest_mask;
  ScalarRaster kz_map;
  ComplexRaster true_gamma;
  SimConfig config;
  double kz = 0.0;
};

/// Gaussian-filtered white noise, rescaled to the configured forest mean and
/// spread, clamped to [2, h_max]; non-forest pixels are 0.
HeightField synth_height_field(const SimConfig& config);

/// Full scene: height field, constant kz drawn from the configured range, and
/// the per-pixel target coherence budget.product() * gamma_rvog(h, kz).
SyntheticScene make_scene(const SimConfig& config);

/// s1 = n1, s2 = conj(gamma) n1 + sqrt(1 - |gamma|^2) n2.
SlcPair simulate_slc_pair(const SyntheticScene& scene, std::uint64_t seed);

/// Truth plus Gaussian noise on forest pixels, clamped at 0; non-forest
/// pixels are invalid.
ScalarRaster make_reference_heights(const SyntheticScene& scene, double noise_std,
                                    std::uint64_t seed);

/// Periodic separable Gaussian blur; sigma in pixels, 0 leaves input as is.
Grid<double> gaussian_blur_periodic(const Grid<double>& in, double sigma);

}  // namespace cohnet

#pragma once

#include <complex>
#include <filesystem>
#include <limits>
#include <numbers>
#include <vector>

#include "cohnet/raster.hpp"

namespace cohnet {

inline constexpr double kDefaultIncidence = 0.7854;  // rad, ~45 deg

/// Random-volume-over-ground state: canopy height, extinction, ground ratio,
/// ground elevation, incidence angle and vertical wavenumber.
///
/// Heights are confined to the first ambiguity branch, [0, 2*pi/kz], and to an
/// optional configured cap.
class RvogParams {
 public:
  RvogParams(double hv, double kz, double sigma = 0.0, double mu = 0.0, double z0 = 0.0,
             double theta = kDefaultIncidence,
             double height_cap = std::numeric_limits<double>::infinity());

  double hv() const { return hv_; }
  double kz() const { return kz_; }
  double sigma() const { return sigma_; }
  double mu() const { return mu_; }
  double z0() const { return z0_; }
  double theta() const { return theta_; }

  /// min(height cap, 2*pi/kz)
  double max_height() const;

 private:
  double hv_, kz_, sigma_, mu_, z0_, theta_, height_cap_;
};

/// Height of ambiguity 2*pi/kz.
inline double ambiguity_height(double kz) { return 2.0 * std::numbers::pi / kz; }

/// Volume-only coherence for the exponential profile exp(2*sigma*z/cos(theta)),
/// including the ground phase ramp exp(i*kz*z0).
std::complex<double> rvog_volume_coherence(const RvogParams& p);

/// Two-layer coherence exp(i*kz*z0) * (gamma_v + mu) / (1 + mu).
std::complex<double> rvog_total_coherence(const RvogParams& p);

/// |sin(kz*hv/2) / (kz*hv/2)| on the first branch.
double sinc_magnitude(double hv, double kz);

/// Bisection for the first-branch height whose sinc magnitude equals
/// `gamma_vol_mag`. Bracket width ends at or below `tol` metres.
double invert_height_sinc(double gamma_vol_mag, double kz, double tol = 1e-3);

struct InversionLut {
  double kz = 0.0;
  double theta = kDefaultIncidence;
  double mu = 0.0;
  std::vector<double> hv_grid;
  std::vector<double> sigma_grid;
  /// hv-major: table[i * sigma_grid.size() + j]
  std::vector<std::complex<double>> table;

  std::complex<double> at(std::size_t i, std::size_t j) const {
    return table[i * sigma_grid.size() + j];
  }
};

InversionLut build_inversion_lut(double kz, std::vector<double> hv_grid,
                                 std::vector<double> sigma_grid,
                                 double theta = kDefaultIncidence, double mu = 0.0);

struct HeightExtinction {
  double hv = 0.0;
  double sigma = 0.0;
};

/// Nearest table cell in the complex plane; ties go to smaller hv, then sigma.
HeightExtinction invert_height_lut(std::complex<double> gamma_obs, const InversionLut& lut);

/// Nearest cell by magnitude only, for observations without phase.
HeightExtinction invert_height_lut_magnitude(double gamma_mag, const InversionLut& lut);

void write_lut(const InversionLut& lut, const std::filesystem::path& path);
InversionLut read_lut(const std::filesystem::path& path);

enum class InversionMode { Sinc, Lut };

struct LutGrids {
  std::vector<double> hv_grid;
  std::vector<double> sigma_grid;
  double theta = kDefaultIncidence;
  double mu = 0.0;
};

/// Per-pixel inversion. Pixels where the inversion precondition fails come
/// back invalid. Lut mode builds one table per distinct kz value, restricted
/// to heights on that kz's first branch.
ScalarRaster invert_raster(const ScalarRaster& gamma_vol, const ScalarRaster& kz,
                           InversionMode mode = InversionMode::Sinc, double tol = 1e-3,
                           const LutGrids* grids = nullptr);

}  // namespace cohnet

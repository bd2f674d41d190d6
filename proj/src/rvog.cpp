#include "cohnet/rvog.hpp"

#include <cmath>
#include <map>

#include "cohnet/fileutil.hpp"

namespace cohnet {

using cd = std::complex<double>;

RvogParams::RvogParams(double hv, double kz, double sigma, double mu, double z0,
                       double theta, double height_cap)
    : hv_(hv), kz_(kz), sigma_(sigma), mu_(mu), z0_(z0), theta_(theta), height_cap_(height_cap) {
  require(kz > 0.0 && std::isfinite(kz), "kz must be positive");
  require(sigma >= 0.0 && std::isfinite(sigma), "extinction must be >= 0");
  require(mu >= 0.0, "ground-to-volume ratio must be >= 0");
  require(std::isfinite(z0), "ground elevation must be finite");
  require(theta > 0.0 && theta < std::numbers::pi / 2, "incidence must lie in (0, pi/2)");
  require(hv >= 0.0 && hv <= max_height() * (1.0 + 1e-12),
          "canopy height outside [0, min(cap, 2*pi/kz)]");
}

double RvogParams::max_height() const { return std::min(height_cap_, ambiguity_height(kz_)); }

cd rvog_volume_coherence(const RvogParams& p) {
  const cd ground = std::polar(1.0, p.kz() * p.z0());
  const double h = p.hv();
  if (h == 0.0) return ground;
  const double k = p.kz();
  const double a = 2.0 * p.sigma() / std::cos(p.theta());
  const double kh = k * h;
  // exp(i*kz*hv) - 1 without cancellation
  const cd phase_m1(-2.0 * std::pow(std::sin(0.5 * kh), 2), std::sin(kh));
  if (a == 0.0) return ground * phase_m1 / cd(0.0, kh);

  const cd s(a, k);
  const double ah = a * h;
  cd ratio;
  if (ah <= 1.0) {
    // (e^{(a+ik)h} - 1) = expm1(ah) e^{ikh} + (e^{ikh} - 1)
    const cd num = (std::expm1(ah) * std::polar(1.0, kh) + phase_m1) / s;
    const double den = std::expm1(ah) / a;
    ratio = num / den;
  } else {
    // factor e^{ah} out of both integrals
    const cd tail = 1.0 - std::exp(-ah) * std::polar(1.0, -kh);
    ratio = std::polar(1.0, kh) * (tail / s) * (a / -std::expm1(-ah));
  }
  return ground * ratio;
}

cd rvog_total_coherence(const RvogParams& p) {
  const RvogParams flat(p.hv(), p.kz(), p.sigma(), 0.0, 0.0, p.theta());
  const cd gv = rvog_volume_coherence(flat);
  if (p.mu() == 0.0) return rvog_volume_coherence(p);
  return std::polar(1.0, p.kz() * p.z0()) * (gv + p.mu()) / (1.0 + p.mu());
}

double sinc_magnitude(double hv, double kz) {
  require(kz > 0.0, "kz must be positive");
  if (!(hv >= 0.0 && hv <= ambiguity_height(kz) * (1.0 + 1e-12)))
    fail(ErrorKind::InvalidArgument, "height outside the first sinc branch");
  const double x = 0.5 * kz * hv;
  if (x == 0.0) return 1.0;
  return std::abs(std::sin(x) / x);
}

double invert_height_sinc(double gamma_vol_mag, double kz, double tol) {
  require(kz > 0.0, "kz must be positive");
  require(gamma_vol_mag >= 0.0 && gamma_vol_mag <= 1.0, "coherence magnitude outside [0, 1]");
  require(tol > 0.0, "tolerance must be positive");
  const double top = ambiguity_height(kz);
  if (gamma_vol_mag >= 1.0) return 0.0;
  if (gamma_vol_mag <= 0.0) return top;
  double lo = 0.0, hi = top;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sinc_magnitude(mid, kz) > gamma_vol_mag)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

InversionLut build_inversion_lut(double kz, std::vector<double> hv_grid,
                                 std::vector<double> sigma_grid, double theta, double mu) {
  if (hv_grid.empty() || sigma_grid.empty())
    fail(ErrorKind::InvalidArgument, "inversion grids must be non-empty");
  require(std::is_sorted(hv_grid.begin(), hv_grid.end()) &&
              std::is_sorted(sigma_grid.begin(), sigma_grid.end()),
          "inversion grids must be ascending");
  InversionLut lut{kz, theta, mu, std::move(hv_grid), std::move(sigma_grid), {}};
  lut.table.reserve(lut.hv_grid.size() * lut.sigma_grid.size());
  for (double hv : lut.hv_grid)
    for (double sigma : lut.sigma_grid)
      lut.table.push_back(rvog_total_coherence(RvogParams(hv, kz, sigma, mu, 0.0, theta)));
  return lut;
}

namespace {

template <typename Distance>
HeightExtinction nearest_cell(const InversionLut& lut, Distance dist) {
  require(!lut.table.empty(), "empty inversion table");
  const std::size_t ns = lut.sigma_grid.size();
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < lut.hv_grid.size(); ++i) {
    for (std::size_t j = 0; j < ns; ++j) {
      const double d = dist(lut.table[i * ns + j]);
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  return {lut.hv_grid[bi], lut.sigma_grid[bj]};
}

}  // namespace

HeightExtinction invert_height_lut(cd gamma_obs, const InversionLut& lut) {
  return nearest_cell(lut, [&](cd t) { return std::abs(t - gamma_obs); });
}

HeightExtinction invert_height_lut_magnitude(double gamma_mag, const InversionLut& lut) {
  return nearest_cell(lut, [&](cd t) { return std::abs(std::abs(t) - gamma_mag); });
}

void write_lut(const InversionLut& lut, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw("CLUT");
  w.u32(static_cast<std::uint32_t>(lut.hv_grid.size()));
  w.u32(static_cast<std::uint32_t>(lut.sigma_grid.size()));
  w.f64(lut.kz);
  w.f64(lut.theta);
  w.f64(lut.mu);
  for (double v : lut.hv_grid) w.f64(v);
  for (double v : lut.sigma_grid) w.f64(v);
  for (cd v : lut.table) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  write_file_atomic(path, w.bytes());
}

InversionLut read_lut(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != "CLUT") fail(ErrorKind::BadMagic, "not a CLUT file");
  const std::uint64_t nh = in.u32();
  const std::uint64_t ns = in.u32();
  InversionLut lut;
  lut.kz = in.f64();
  lut.theta = in.f64();
  lut.mu = in.f64();
  in.need(8 * (nh + ns + 2 * nh * ns));
  lut.hv_grid.resize(nh);
  lut.sigma_grid.resize(ns);
  for (auto& v : lut.hv_grid) v = in.f64();
  for (auto& v : lut.sigma_grid) v = in.f64();
  lut.table.resize(nh * ns);
  for (auto& v : lut.table) {
    const double re = in.f64();
    v = cd(re, in.f64());
  }
  return lut;
}

ScalarRaster invert_raster(const ScalarRaster& gamma_vol, const ScalarRaster& kz,
                           InversionMode mode, double tol, const LutGrids* grids) {
  if (!gamma_vol.same_shape(kz)) fail(ErrorKind::ShapeMismatch, "gamma and kz rasters differ");
  if (mode == InversionMode::Lut && grids == nullptr)
    fail(ErrorKind::InvalidArgument, "LUT inversion needs grids");
  std::map<float, InversionLut> luts;
  auto lut_for = [&](float k) -> const InversionLut& {
    auto it = luts.find(k);
    if (it != luts.end()) return it->second;
    std::vector<double> hv;
    for (double h : grids->hv_grid)
      if (h <= ambiguity_height(k)) hv.push_back(h);
    return luts.emplace(k, build_inversion_lut(k, hv, grids->sigma_grid, grids->theta, grids->mu))
        .first->second;
  };

  ScalarRaster out(gamma_vol.width(), gamma_vol.height(), 0.0f);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      if (!gamma_vol.is_valid(r, c) || !kz.is_valid(r, c)) {
        out.invalidate(r, c);
        continue;
      }
      try {
        const double g = gamma_vol(r, c);
        const double k = kz(r, c);
        double h = 0.0;
        if (mode == InversionMode::Sinc) {
          h = invert_height_sinc(g, k, tol);
        } else {
          require(k > 0.0 && g >= 0.0 && g <= 1.0, "pixel outside LUT domain");
          h = invert_height_lut_magnitude(g, lut_for(kz(r, c))).hv;
        }
        out.set(r, c, static_cast<float>(h));
      } catch (const Error&) {
        out.invalidate(r, c);
      }
    }
  }
  return out;
}

}  // namespace cohnet

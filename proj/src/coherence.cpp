#include "cohnet/coherence.hpp"

#include <algorithm>
#include <cmath>

namespace cohnet {

void DecorrelationBudget::validate() const {
  for (double f : {gamma_snr, gamma_rg, gamma_quant, gamma_temp, gamma_sensor})
    if (!(f > 0.0 && f <= 1.0))
      fail(ErrorKind::InvalidArgument, "decorrelation factors must lie in (0, 1]");
}

ComplexRaster estimate_coherence(const SlcPair& pair, int window) {
  if (window < 3 || window % 2 == 0)
    fail(ErrorKind::InvalidArgument, "coherence window must be odd and >= 3");
  const auto& s1 = pair.s1;
  const auto& s2 = pair.s2;
  if (!s1.same_shape(s2)) fail(ErrorKind::ShapeMismatch, "SLC pair dimensions differ");

  const int h = s1.height();
  const int w = s1.width();
  const int half = window / 2;
  const Mask both = s1.valid() && s2.valid();

  // Per-pixel products in double, zeroed where either sample is invalid.
  Grid<std::complex<double>> cross(h, w);
  Grid<double> p1(h, w), p2(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!both(r, c)) {
        cross(r, c) = 0.0;
        p1(r, c) = p2(r, c) = 0.0;
        continue;
      }
      const std::complex<double> a = s1(r, c);
      const std::complex<double> b = s2(r, c);
      cross(r, c) = a * std::conj(b);
      p1(r, c) = std::norm(a);
      p2(r, c) = std::norm(b);
    }
  }

  Grid<std::complex<float>> out(h, w);
  Mask valid(h, w);
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - half);
    const int nr = std::min(h - 1, r + half) - r0 + 1;
    for (int c = 0; c < w; ++c) {
      const int c0 = std::max(0, c - half);
      const int nc = std::min(w - 1, c + half) - c0 + 1;
      const std::complex<double> num = cross.block(r0, c0, nr, nc).sum();
      const double d1 = p1.block(r0, c0, nr, nc).sum();
      const double d2 = p2.block(r0, c0, nr, nc).sum();
      if (!(d1 > 0.0 && d2 > 0.0) || !both(r, c)) {
        out(r, c) = 0.0f;
        valid(r, c) = false;
        continue;
      }
      std::complex<double> g = num / std::sqrt(d1 * d2);
      const double mag = std::abs(g);
      if (mag > 1.0) g /= mag;
      out(r, c) = std::complex<float>(g);
      valid(r, c) = true;
    }
  }
  return ComplexRaster(std::move(out), std::move(valid));
}

ScalarRaster volume_decorrelation(const ScalarRaster& gamma_magnitude,
                                  const DecorrelationBudget& budget) {
  budget.validate();
  const double scale = budget.gamma_rg / budget.gamma_snr;
  Grid<float> v =
      (gamma_magnitude.values().cast<double>() * scale).min(1.0).max(0.0).cast<float>();
  return ScalarRaster(std::move(v), gamma_magnitude.valid());
}

ScalarRaster volume_decorrelation(const ComplexRaster& gamma,
                                  const DecorrelationBudget& budget) {
  return volume_decorrelation(magnitude(gamma), budget);
}

double snr_decorrelation(double snr_linear) {
  if (!(snr_linear > 0.0)) fail(ErrorKind::InvalidArgument, "SNR must be positive");
  return snr_linear / (1.0 + snr_linear);
}

}  // namespace cohnet

#pragma once

#include "cohnet/raster.hpp"

namespace cohnet {

struct SlcPair {
  ComplexRaster s1;
  ComplexRaster s2;
};

/// Multiplicative coherence factors. Every factor lies in (0, 1].
struct DecorrelationBudget {
  double gamma_snr = 1.0;
  double gamma_rg = 1.0;
  double gamma_quant = 1.0;
  double gamma_temp = 1.0;  // bistatic acquisition
  double gamma_sensor = 1.0;

  void validate() const;
  /// Product of every non-volume factor.
  double product() const {
    return gamma_snr * gamma_rg * gamma_quant * gamma_temp * gamma_sensor;
  }
};

/// Boxcar maximum-likelihood coherence over an odd `window` centred on each
/// pixel. Only neighbours valid in both images contribute and the window
/// shrinks at the borders. Magnitudes are clamped to 1; a pixel whose power
/// sums vanish is invalid.
ComplexRaster estimate_coherence(const SlcPair& pair, int window = 7);

/// |gamma| * gamma_rg / gamma_snr, clamped to [0, 1].
ScalarRaster volume_decorrelation(const ComplexRaster& gamma,
                                  const DecorrelationBudget& budget);
ScalarRaster volume_decorrelation(const ScalarRaster& gamma_magnitude,
                                  const DecorrelationBudget& budget);

/// snr / (1 + snr) for a linear SNR.
double snr_decorrelation(double snr_linear);

}  // namespace cohnet

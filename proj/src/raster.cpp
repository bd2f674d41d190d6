#include "cohnet/raster.hpp"

#include <cmath>
#include <string>

namespace cohnet {

void check_role(const ScalarRaster& r, RasterRole role, double h_max) {
  for (int row = 0; row < r.height(); ++row) {
    for (int col = 0; col < r.width(); ++col) {
      if (!r.is_valid(row, col)) continue;
      const double v = r(row, col);
      bool ok = true;
      switch (role) {
        case RasterRole::Generic:
          break;
        case RasterRole::CoherenceMagnitude:
          ok = v >= 0.0 && v <= 1.0;
          break;
        case RasterRole::Height:
          ok = v >= 0.0 && v <= h_max;
          break;
        case RasterRole::Wavenumber:
          ok = v > 0.0;
          break;
      }
      if (!ok)
        fail(ErrorKind::InvalidArgument,
             "pixel (" + std::to_string(row) + "," + std::to_string(col) +
                 ") out of range for raster role");
    }
  }
}

ScalarRaster magnitude(const ComplexRaster& r) {
  return ScalarRaster(r.values().abs(), r.valid());
}

ScalarRaster with_mask(const ScalarRaster& r, const Mask& keep) {
  if (keep.rows() != r.height() || keep.cols() != r.width())
    fail(ErrorKind::ShapeMismatch, "mask shape differs from raster");
  return ScalarRaster(r.values(), r.valid() && keep);
}

}  // namespace cohnet

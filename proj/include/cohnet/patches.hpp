#pragma once

#include <vector>

#include "cohnet/raster.hpp"

namespace cohnet {

struct PatchOrigin {
  int row = 0;
  int col = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Placement of square patches over a source raster, row-major origin order.
struct PatchGrid {
  int patch_size = 64;
  int stride = 32;
  int source_width = 0;
  int source_height = 0;
  std::vector<PatchOrigin> origins;
};

/// Origins along one axis: 0, stride, 2*stride, ... plus a final origin flush
/// with the far edge when the stride does not land on it.
std::vector<int> axis_origins(int dim, int patch_size, int stride);

PatchGrid make_patch_grid(int width, int height, int patch_size = 64, int stride = 32);

template <typename T>
Raster<T> crop(const Raster<T>& r, PatchOrigin o, int size) {
  return Raster<T>(r.values().block(o.row, o.col, size, size),
                   r.valid().block(o.row, o.col, size, size));
}

template <typename T>
std::vector<Raster<T>> extract_patches(const Raster<T>& r, const PatchGrid& grid) {
  if (r.width() != grid.source_width || r.height() != grid.source_height)
    fail(ErrorKind::ShapeMismatch, "raster does not match patch grid source");
  std::vector<Raster<T>> out;
  out.reserve(grid.origins.size());
  for (const auto& o : grid.origins) out.push_back(crop(r, o, grid.patch_size));
  return out;
}

struct PatchSet {
  std::vector<ScalarRaster> patches;
  PatchGrid grid;
};

PatchSet extract_patches(const ScalarRaster& r, int patch_size = 64, int stride = 32);

/// Averages overlapping valid contributions with equal weight. A pixel with no
/// valid contributor is invalid in the output.
ScalarRaster reassemble_patches(const std::vector<ScalarRaster>& patches,
                                const PatchGrid& grid);

}  // namespace cohnet

#include "cohnet/patches.hpp"

namespace cohnet {

std::vector<int> axis_origins(int dim, int patch_size, int stride) {
  require(stride >= 1, "stride must be >= 1");
  require(patch_size >= 1, "patch size must be >= 1");
  if (patch_size > dim) fail(ErrorKind::InvalidArgument, "patch size exceeds raster dimension");
  std::vector<int> out;
  for (int o = 0; o + patch_size <= dim; o += stride) out.push_back(o);
  if (out.back() + patch_size < dim) out.push_back(dim - patch_size);
  return out;
}

PatchGrid make_patch_grid(int width, int height, int patch_size, int stride) {
  PatchGrid g{patch_size, stride, width, height, {}};
  const auto rows = axis_origins(height, patch_size, stride);
  const auto cols = axis_origins(width, patch_size, stride);
  g.origins.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols) g.origins.push_back({r, c});
  return g;
}

PatchSet extract_patches(const ScalarRaster& r, int patch_size, int stride) {
  PatchSet s;
  s.grid = make_patch_grid(r.width(), r.height(), patch_size, stride);
  s.patches = extract_patches(r, s.grid);
  return s;
}

ScalarRaster reassemble_patches(const std::vector<ScalarRaster>& patches,
                                const PatchGrid& grid) {
  if (patches.size() != grid.origins.size())
    fail(ErrorKind::ShapeMismatch, "patch count does not match grid");
  Grid<double> sum = Grid<double>::Zero(grid.source_height, grid.source_width);
  Grid<int> count = Grid<int>::Zero(grid.source_height, grid.source_width);
  const int p = grid.patch_size;
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const auto& patch = patches[k];
    if (patch.width() != p || patch.height() != p)
      fail(ErrorKind::ShapeMismatch, "patch size does not match grid");
    const auto o = grid.origins[k];
    if (o.row + p > grid.source_height || o.col + p > grid.source_width)
      fail(ErrorKind::ShapeMismatch, "patch origin outside grid source");
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < p; ++c) {
        if (!patch.is_valid(r, c)) continue;
        sum(o.row + r, o.col + c) += patch(r, c);
        count(o.row + r, o.col + c) += 1;
      }
    }
  }
  Grid<float> values = (sum / count.cast<double>().max(1.0)).cast<float>();
  return ScalarRaster(std::move(values), count > 0);
}

}  // namespace cohnet

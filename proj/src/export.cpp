#include "cohnet/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cohnet/fileutil.hpp"
#include "cohnet/metrics.hpp"

namespace cohnet {

std::string scatter_csv(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask) {
  const Mask m = joint_mask(pred, ref, mask);
  std::string out = "ref_m,pred_m\n";
  char line[64];
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c) {
      if (!m(r, c)) continue;
      std::snprintf(line, sizeof line, "%.9g,%.9g\n", static_cast<double>(ref(r, c)),
                    static_cast<double>(pred(r, c)));
      out += line;
    }
  return out;
}

void export_scatter(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask,
                    const std::filesystem::path& path) {
  write_text_atomic(path, scatter_csv(pred, ref, mask));
}

std::string pgm_bytes(const ScalarRaster& r, ValueRange range) {
  if (!(range.min < range.max)) fail(ErrorKind::InvalidArgument, "degenerate PGM value range");
  std::string out = "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) + "\n255\n";
  const double span = range.max - range.min;
  for (int row = 0; row < r.height(); ++row)
    for (int col = 0; col < r.width(); ++col) {
      int q = 0;
      if (r.is_valid(row, col)) {
        const double t = std::floor((r(row, col) - range.min) / span * 255.0);
        q = static_cast<int>(std::clamp(t, 0.0, 255.0));
      }
      out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
  return out;
}

void export_map_pgm(const ScalarRaster& r, const std::filesystem::path& path, ValueRange range) {
  write_text_atomic(path, pgm_bytes(r, range));
}

}  // namespace cohnet

#pragma once

#include <filesystem>
#include <string>

#include "cohnet/raster.hpp"

namespace cohnet {

/// "ref_m,pred_m" header then one row per jointly valid pixel, row-major.
std::string scatter_csv(const ScalarRaster& pred, const ScalarRaster& ref,
                        const Mask* mask = nullptr);
void export_scatter(const ScalarRaster& pred, const ScalarRaster& ref, const Mask* mask,
                    const std::filesystem::path& path);

struct ValueRange {
  double min = 0.0;
  double max = 1.0;
};

/// Binary 8-bit PGM: floor((v - min) / (max - min) * 255) clamped to
/// [0, 255]; invalid pixels are 0.
std::string pgm_bytes(const ScalarRaster& r, ValueRange range);
void export_map_pgm(const ScalarRaster& r, const std::filesystem::path& path, ValueRange range);

}  // namespace cohnet

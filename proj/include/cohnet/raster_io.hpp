#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "cohnet/fileutil.hpp"
#include "cohnet/raster.hpp"

namespace cohnet {

// CHR1 layout, little-endian:
//   "CHR1" | u8 dtype (0 scalar f32, 1 complex f32 pair) | u8 0 | u16 0
//   | u32 width | u32 height | width*height samples | width*height mask bytes
enum class RasterDtype : std::uint8_t { Scalar = 0, Complex = 1 };

using AnyRaster = std::variant<ScalarRaster, ComplexRaster>;

struct RasterLimits {
  std::uint64_t max_pixels = std::uint64_t{kMaxRasterSide} * kMaxRasterSide;
};

Bytes encode_raster(const ScalarRaster& r);
Bytes encode_raster(const ComplexRaster& r);
AnyRaster decode_raster(std::span<const std::uint8_t> bytes, RasterLimits limits = {});

void write_raster(const ScalarRaster& r, const std::filesystem::path& path);
void write_raster(const ComplexRaster& r, const std::filesystem::path& path);
AnyRaster read_raster(const std::filesystem::path& path, RasterLimits limits = {});

/// read_raster that insists on a dtype; ShapeMismatch otherwise.
ScalarRaster read_scalar_raster(const std::filesystem::path& path);
ComplexRaster read_complex_raster(const std::filesystem::path& path);

}  // namespace cohnet

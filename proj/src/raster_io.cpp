#include "cohnet/raster_io.hpp"

#include <string>

namespace cohnet {

namespace {

constexpr std::string_view kMagic = "CHR1";

template <typename T>
Bytes encode(const Raster<T>& r, RasterDtype dtype) {
  if (r.width() == 0 || r.height() == 0)
    fail(ErrorKind::InvalidArgument, "cannot write a raster with a zero dimension");
  ByteWriter w;
  w.raw(kMagic);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(0);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(r.width()));
  w.u32(static_cast<std::uint32_t>(r.height()));
  const T* v = r.values().data();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if constexpr (std::is_same_v<T, float>) {
      w.f32(v[i]);
    } else {
      w.f32(v[i].real());
      w.f32(v[i].imag());
    }
  }
  const bool* m = r.valid().data();
  for (Eigen::Index i = 0; i < r.size(); ++i) w.u8(m[i] ? 1 : 0);
  return w.take();
}

template <typename T>
Raster<T> decode_payload(ByteReader& in, int width, int height) {
  Grid<T> values(height, width);
  Mask valid(height, width);
  T* v = values.data();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if constexpr (std::is_same_v<T, float>) {
      v[i] = in.f32();
    } else {
      const float re = in.f32();
      const float im = in.f32();
      v[i] = {re, im};
    }
  }
  bool* m = valid.data();
  for (Eigen::Index i = 0; i < valid.size(); ++i) {
    const auto b = in.u8();
    if (b > 1) fail(ErrorKind::InvalidArgument, "corrupt mask byte");
    m[i] = b == 1;
  }
  return Raster<T>(std::move(values), std::move(valid));
}

}  // namespace

Bytes encode_raster(const ScalarRaster& r) { return encode(r, RasterDtype::Scalar); }
Bytes encode_raster(const ComplexRaster& r) { return encode(r, RasterDtype::Complex); }

AnyRaster decode_raster(std::span<const std::uint8_t> bytes, RasterLimits limits) {
  ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != kMagic) fail(ErrorKind::BadMagic, "not a CHR1 raster");
  const auto dtype = in.u8();
  in.u8();
  in.u16();
  const std::uint64_t width = in.u32();
  const std::uint64_t height = in.u32();
  if (dtype > 1) fail(ErrorKind::BadMagic, "unknown raster dtype " + std::to_string(dtype));
  if (width == 0 || height == 0) fail(ErrorKind::InvalidArgument, "zero raster dimension");
  const std::uint64_t pixels = width * height;
  if (pixels > limits.max_pixels || width > kMaxRasterSide || height > kMaxRasterSide)
    fail(ErrorKind::DimensionOverflow, "raster dimensions exceed cap");
  const std::uint64_t sample = dtype == 0 ? 4 : 8;
  in.need(pixels * (sample + 1));
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  if (dtype == 0) return decode_payload<float>(in, w, h);
  return decode_payload<std::complex<float>>(in, w, h);
}

void write_raster(const ScalarRaster& r, const std::filesystem::path& path) {
  write_file_atomic(path, encode_raster(r));
}

void write_raster(const ComplexRaster& r, const std::filesystem::path& path) {
  write_file_atomic(path, encode_raster(r));
}

AnyRaster read_raster(const std::filesystem::path& path, RasterLimits limits) {
  return decode_raster(read_file(path), limits);
}

ScalarRaster read_scalar_raster(const std::filesystem::path& path) {
  auto any = read_raster(path);
  if (auto* r = std::get_if<ScalarRaster>(&any)) return std::move(*r);
  fail(ErrorKind::ShapeMismatch, path.string() + ": expected a scalar raster");
}

ComplexRaster read_complex_raster(const std::filesystem::path& path) {
  auto any = read_raster(path);
  if (auto* r = std::get_if<ComplexRaster>(&any)) return std::move(*r);
  fail(ErrorKind::ShapeMismatch, path.string() + ": expected a complex raster");
}

}  // namespace cohnet

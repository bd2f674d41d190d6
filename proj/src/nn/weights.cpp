#include "cohnet/nn/weights.hpp"

namespace cohnet::nn {

namespace {

void put_tensor(ByteWriter& w, Bytes& payload, const Shape& shape, const float* data,
                Eigen::Index n) {
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (int d : shape) w.u32(static_cast<std::uint32_t>(d));
  ByteWriter p;
  for (Eigen::Index i = 0; i < n; ++i) p.f32(data[i]);
  const auto& pb = p.bytes();
  for (auto b : pb) w.u8(b);
  payload.insert(payload.end(), pb.begin(), pb.end());
}

}  // namespace

Bytes encode_weights(const Network<float>& net, const std::vector<float>& metadata) {
  ByteWriter w;
  Bytes payload;
  w.raw("CWT1");
  std::uint32_t count = 1;
  for (const auto& l : net.layers())
    if (l.has_params()) count += 2;
  w.u32(count);
  put_tensor(w, payload, {static_cast<int>(metadata.size())}, metadata.data(),
             static_cast<Eigen::Index>(metadata.size()));
  for (const auto& l : net.layers()) {
    if (!l.has_params()) continue;
    put_tensor(w, payload, l.weight.shape, l.weight.ptr(), l.weight.size());
    put_tensor(w, payload, l.bias.shape, l.bias.ptr(), l.bias.size());
  }
  w.u64(fnv1a64(payload));
  return w.take();
}

std::vector<float> decode_weights(std::span<const std::uint8_t> bytes, Network<float>& net) {
  ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != "CWT1") fail(ErrorKind::BadMagic, "not a CWT1 weight file");
  const std::uint32_t count = in.u32();
  std::uint32_t expected = 1;
  for (const auto& l : net.layers())
    if (l.has_params()) expected += 2;
  if (count != expected)
    fail(ErrorKind::ShapeMismatch, "weight file holds " + std::to_string(count) +
                                       " tensors, architecture needs " + std::to_string(expected));

  Bytes payload;
  auto read_tensor = [&](const Shape* want) {
    const int rank = in.u8();
    Shape shape(static_cast<std::size_t>(rank));
    for (auto& d : shape) d = static_cast<int>(in.u32());
    if (want && shape != *want)
      fail(ErrorKind::ShapeMismatch, "tensor shape " + shape_string(shape) +
                                         " does not match architecture " + shape_string(*want));
    const auto n = static_cast<std::size_t>(shape_size(shape));
    in.need(4 * n);
    std::vector<float> v(n);
    const std::size_t start = in.position();
    for (auto& x : v) x = in.f32();
    payload.insert(payload.end(), bytes.begin() + static_cast<std::ptrdiff_t>(start),
                   bytes.begin() + static_cast<std::ptrdiff_t>(in.position()));
    return v;
  };

  const auto metadata = read_tensor(nullptr);
  std::vector<std::vector<float>> loaded;
  for (const auto& l : net.layers()) {
    if (!l.has_params()) continue;
    loaded.push_back(read_tensor(&l.weight.shape));
    loaded.push_back(read_tensor(&l.bias.shape));
  }
  const std::uint64_t sum = in.u64();
  if (sum != fnv1a64(payload)) fail(ErrorKind::BadMagic, "weight file checksum mismatch");

  std::size_t k = 0;
  for (auto& l : net.layers()) {
    if (!l.has_params()) continue;
    l.weight.data = Eigen::Map<const Eigen::ArrayXf>(loaded[k].data(), l.weight.size());
    l.bias.data = Eigen::Map<const Eigen::ArrayXf>(loaded[k + 1].data(), l.bias.size());
    k += 2;
  }
  return metadata;
}

void save_weights(const Network<float>& net, const std::filesystem::path& path,
                  const std::vector<float>& metadata) {
  write_file_atomic(path, encode_weights(net, metadata));
}

std::vector<float> load_weights(const std::filesystem::path& path, Network<float>& net) {
  return decode_weights(read_file(path), net);
}

std::uint64_t file_checksum(const std::filesystem::path& path) { return fnv1a64(read_file(path)); }

}  // namespace cohnet::nn

#include "cohnet/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cohnet/random.hpp"

namespace cohnet::nn {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

const char* layer_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv3x3: return "Conv3x3";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::MaxPool2: return "MaxPool2";
    case LayerKind::UpsampleNearest2: return "UpsampleNearest2";
    case LayerKind::SkipConcat: return "SkipConcat";
  }
  return "?";
}

namespace {

template <typename S>
using RowMatrix = typename Tensor<S>::RowMatrix;

template <typename S>
void accumulate(Tensor<S>& dst, const Tensor<S>& src) {
  if (dst.size() == 0)
    dst = src;
  else
    dst.data += src.data;
}

// col is (C*9, H*W); zero padding of one pixel.
template <typename S>
void im2col(const S* x, int channels, int h, int w, S* col) {
  const Eigen::Index hw = Eigen::Index{h} * w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* row = col + (Eigen::Index{c} * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          S* dst = row + Eigen::Index{y} * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, S(0));
            continue;
          }
          const S* src = x + (Eigen::Index{c} * h + sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            dst[xx] = (sx < 0 || sx >= w) ? S(0) : src[sx];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const S* col, int channels, int h, int w, S* x) {
  const Eigen::Index hw = Eigen::Index{h} * w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* row = col + (Eigen::Index{c} * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const S* src = row + Eigen::Index{y} * w;
          S* dst = x + (Eigen::Index{c} * h + sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            if (sx >= 0 && sx < w) dst[sx] += src[xx];
          }
        }
      }
    }
  }
}

template <typename S>
S sigmoid_strict(S x) {
  const S y = x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
  // keep the head strictly inside (0, 1) even where the float rounds to a bound
  return std::clamp(y, std::numeric_limits<S>::min(),
                    S(1) - std::numeric_limits<S>::epsilon() / 2);
}

void check_image(const Shape& s, int channels, const char* what) {
  if (s.size() != 4 || s[1] != channels)
    fail(ErrorKind::ShapeMismatch, std::string(what) + " expects (N," + std::to_string(channels) +
                                       ",H,W), got " + shape_string(s));
}

}  // namespace

template <typename S>
Gradients<S>& Gradients<S>::operator+=(const Gradients& o) {
  if (weight.size() != o.weight.size())
    fail(ErrorKind::ShapeMismatch, "gradient sets differ in layer count");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    accumulate(weight[i], o.weight[i]);
    accumulate(bias[i], o.bias[i]);
  }
  return *this;
}

template <typename S>
Gradients<S>& Gradients<S>::operator*=(S s) {
  for (auto& t : weight) t.data *= s;
  for (auto& t : bias) t.data *= s;
  return *this;
}

template <typename S>
Network<S>& Network<S>::push(Layer<S> l) {
  layers_.push_back(std::move(l));
  return *this;
}

template <typename S>
Network<S>& Network<S>::dense(int in, int out) {
  require(in > 0 && out > 0, "dense layer needs positive sizes");
  return push({LayerKind::Dense, in, out, -1, Tensor<S>({out, in}), Tensor<S>({out})});
}

template <typename S>
Network<S>& Network<S>::conv3x3(int in_ch, int out_ch) {
  require(in_ch > 0 && out_ch > 0, "conv layer needs positive channel counts");
  return push({LayerKind::Conv3x3, in_ch, out_ch, -1, Tensor<S>({out_ch, in_ch, 3, 3}),
               Tensor<S>({out_ch})});
}

template <typename S>
Network<S>& Network<S>::relu() { return push({LayerKind::ReLU, 0, 0, -1, {}, {}}); }
template <typename S>
Network<S>& Network<S>::sigmoid() { return push({LayerKind::Sigmoid, 0, 0, -1, {}, {}}); }
template <typename S>
Network<S>& Network<S>::maxpool2() { return push({LayerKind::MaxPool2, 0, 0, -1, {}, {}}); }
template <typename S>
Network<S>& Network<S>::upsample2() {
  return push({LayerKind::UpsampleNearest2, 0, 0, -1, {}, {}});
}

template <typename S>
Network<S>& Network<S>::skip_concat(int source_layer) {
  require(source_layer >= 0 && source_layer < static_cast<int>(layers_.size()),
          "skip source must be an earlier layer");
  return push({LayerKind::SkipConcat, 0, 0, source_layer, {}, {}});
}

template <typename S>
Eigen::Index Network<S>::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename S>
Gradients<S> Network<S>::zero_gradients() const {
  Gradients<S> g;
  for (const auto& l : layers_) {
    g.weight.push_back(Tensor<S>::zeros_like(l.weight));
    g.bias.push_back(Tensor<S>::zeros_like(l.bias));
  }
  return g;
}

template <typename S>
Tensor<S> Network<S>::forward(const Tensor<S>& x, Tape<S>* tape) const {
  if (x.rank() == 4 && (x.dim(2) % spatial_multiple_ != 0 || x.dim(3) % spatial_multiple_ != 0))
    fail(ErrorKind::ShapeMismatch, "spatial dims " + shape_string(x.shape) +
                                       " not divisible by " + std::to_string(spatial_multiple_));
  std::vector<Tensor<S>> local;
  std::vector<Tensor<S>>& outs = tape ? tape->outputs : local;
  outs.clear();
  outs.reserve(layers_.size() + 1);
  outs.push_back(x);
  if (tape) tape->argmax.assign(layers_.size(), {});

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer<S>& l = layers_[i];
    const Tensor<S>& in = outs.back();
    Tensor<S> y;
    switch (l.kind) {
      case LayerKind::Dense: {
        if (in.rank() != 2 || in.dim(1) != l.in)
          fail(ErrorKind::ShapeMismatch, "Dense expects (N," + std::to_string(l.in) + "), got " +
                                             shape_string(in.shape));
        const int n = in.dim(0);
        y = Tensor<S>({n, l.out});
        auto ym = y.matrix(n, l.out);
        ym.noalias() = in.matrix(n, l.in) * l.weight.matrix(l.out, l.in).transpose();
        ym.rowwise() += l.bias.matrix(1, l.out).row(0);
        break;
      }
      case LayerKind::Conv3x3: {
        check_image(in.shape, l.in, "Conv3x3");
        const int n = in.dim(0), h = in.dim(2), w = in.dim(3);
        const Eigen::Index hw = Eigen::Index{h} * w;
        y = Tensor<S>({n, l.out, h, w});
        RowMatrix<S> col(Eigen::Index{l.in} * 9, hw);
        const auto wm = l.weight.matrix(l.out, Eigen::Index{l.in} * 9);
        const auto bm = l.bias.matrix(l.out, 1);
        for (int s = 0; s < n; ++s) {
          im2col(in.ptr() + s * l.in * hw, l.in, h, w, col.data());
          typename Tensor<S>::MatrixMap ys(y.ptr() + s * l.out * hw, l.out, hw);
          ys.noalias() = wm * col;
          ys.colwise() += bm.col(0);
        }
        break;
      }
      case LayerKind::ReLU:
        y = Tensor<S>(in.shape, in.data.max(S(0)));
        break;
      case LayerKind::Sigmoid:
        y = Tensor<S>(in.shape, in.data.unaryExpr([](S v) { return sigmoid_strict(v); }));
        break;
      case LayerKind::MaxPool2: {
        if (in.rank() != 4 || in.dim(2) % 2 || in.dim(3) % 2)
          fail(ErrorKind::ShapeMismatch, "MaxPool2 needs even spatial dims, got " +
                                             shape_string(in.shape));
        const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
        const int oh = h / 2, ow = w / 2;
        y = Tensor<S>({n, c, oh, ow});
        std::vector<std::int32_t> arg(static_cast<std::size_t>(y.size()));
        Eigen::Index k = 0;
        for (int p = 0; p < n * c; ++p) {
          const S* src = in.ptr() + Eigen::Index{p} * h * w;
          const Eigen::Index base = Eigen::Index{p} * h * w;
          for (int r = 0; r < oh; ++r) {
            for (int q = 0; q < ow; ++q, ++k) {
              Eigen::Index best = Eigen::Index{2 * r} * w + 2 * q;
              for (Eigen::Index cand : {best + 1, best + w, best + w + 1})
                if (src[cand] > src[best]) best = cand;
              y.data[k] = src[best];
              arg[static_cast<std::size_t>(k)] = static_cast<std::int32_t>(base + best);
            }
          }
        }
        if (tape) tape->argmax[i] = std::move(arg);
        break;
      }
      case LayerKind::UpsampleNearest2: {
        if (in.rank() != 4) fail(ErrorKind::ShapeMismatch, "UpsampleNearest2 needs an image");
        const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
        y = Tensor<S>({n, c, 2 * h, 2 * w});
        for (int p = 0; p < n * c; ++p) {
          const S* src = in.ptr() + Eigen::Index{p} * h * w;
          S* dst = y.ptr() + Eigen::Index{p} * 4 * h * w;
          for (int r = 0; r < 2 * h; ++r)
            for (int q = 0; q < 2 * w; ++q) dst[Eigen::Index{r} * 2 * w + q] = src[(r / 2) * w + q / 2];
        }
        break;
      }
      case LayerKind::SkipConcat: {
        const Tensor<S>& src = outs[static_cast<std::size_t>(l.source) + 1];
        if (src.rank() != in.rank() || src.dim(0) != in.dim(0) ||
            !std::equal(in.shape.begin() + 2, in.shape.end(), src.shape.begin() + 2))
          fail(ErrorKind::ShapeMismatch, "SkipConcat shapes " + shape_string(in.shape) + " and " +
                                             shape_string(src.shape) + " are incompatible");
        Shape s = in.shape;
        s[1] += src.dim(1);
        y = Tensor<S>(s);
        const int n = in.dim(0);
        const Eigen::Index a = in.size() / n, b = src.size() / n;
        for (int k = 0; k < n; ++k) {
          y.data.segment(k * (a + b), a) = in.data.segment(k * a, a);
          y.data.segment(k * (a + b) + a, b) = src.data.segment(k * b, b);
        }
        break;
      }
    }
    outs.push_back(std::move(y));
  }
  if (tape) return outs.back();
  return std::move(outs.back());
}

template <typename S>
BackwardResult<S> Network<S>::backward(const Tape<S>& tape, const Tensor<S>& upstream) const {
  if (tape.outputs.size() != layers_.size() + 1)
    fail(ErrorKind::InvalidArgument, "backward called without a matching forward tape");
  if (upstream.shape != tape.outputs.back().shape)
    fail(ErrorKind::ShapeMismatch, "upstream gradient shape " + shape_string(upstream.shape) +
                                       " does not match output " +
                                       shape_string(tape.outputs.back().shape));
  const bool want_params = !frozen_;
  Gradients<S> pg;
  if (want_params) pg = zero_gradients();

  std::vector<Tensor<S>> g(layers_.size() + 1);
  g.back() = upstream;

  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const Layer<S>& l = layers_[static_cast<std::size_t>(i)];
    const Tensor<S>& in = tape.outputs[static_cast<std::size_t>(i)];
    const Tensor<S>& out = tape.outputs[static_cast<std::size_t>(i) + 1];
    Tensor<S> gy = std::move(g[static_cast<std::size_t>(i) + 1]);
    if (gy.size() == 0) gy = Tensor<S>::zeros_like(out);
    Tensor<S> gx;
    switch (l.kind) {
      case LayerKind::Dense: {
        const int n = in.dim(0);
        const auto gym = gy.matrix(n, l.out);
        if (want_params) {
          pg.weight[i].matrix(l.out, l.in).noalias() = gym.transpose() * in.matrix(n, l.in);
          pg.bias[i].matrix(1, l.out) = gym.colwise().sum();
        }
        gx = Tensor<S>(in.shape);
        gx.matrix(n, l.in).noalias() = gym * l.weight.matrix(l.out, l.in);
        break;
      }
      case LayerKind::Conv3x3: {
        const int n = in.dim(0), h = in.dim(2), w = in.dim(3);
        const Eigen::Index hw = Eigen::Index{h} * w;
        const Eigen::Index k9 = Eigen::Index{l.in} * 9;
        gx = Tensor<S>(in.shape);
        RowMatrix<S> col(k9, hw), dcol(k9, hw);
        const auto wm = l.weight.matrix(l.out, k9);
        for (int s = 0; s < n; ++s) {
          typename Tensor<S>::ConstMatrixMap gys(gy.ptr() + s * l.out * hw, l.out, hw);
          if (want_params) {
            im2col(in.ptr() + s * l.in * hw, l.in, h, w, col.data());
            pg.weight[i].matrix(l.out, k9).noalias() += gys * col.transpose();
            pg.bias[i].matrix(l.out, 1) += gys.rowwise().sum();
          }
          dcol.noalias() = wm.transpose() * gys;
          col2im(dcol.data(), l.in, h, w, gx.ptr() + s * l.in * hw);
        }
        break;
      }
      case LayerKind::ReLU:
        gx = Tensor<S>(in.shape, (in.data > S(0)).select(gy.data, S(0)));
        break;
      case LayerKind::Sigmoid:
        gx = Tensor<S>(in.shape, gy.data * out.data * (S(1) - out.data));
        break;
      case LayerKind::MaxPool2: {
        gx = Tensor<S>(in.shape);
        const auto& arg = tape.argmax[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < gy.size(); ++k) gx.data[arg[static_cast<std::size_t>(k)]] += gy.data[k];
        break;
      }
      case LayerKind::UpsampleNearest2: {
        gx = Tensor<S>(in.shape);
        const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
        for (int p = 0; p < n * c; ++p) {
          const S* src = gy.ptr() + Eigen::Index{p} * 4 * h * w;
          S* dst = gx.ptr() + Eigen::Index{p} * h * w;
          for (int r = 0; r < 2 * h; ++r)
            for (int q = 0; q < 2 * w; ++q) dst[(r / 2) * w + q / 2] += src[Eigen::Index{r} * 2 * w + q];
        }
        break;
      }
      case LayerKind::SkipConcat: {
        const std::size_t si = static_cast<std::size_t>(l.source) + 1;
        const Tensor<S>& src = tape.outputs[si];
        gx = Tensor<S>(in.shape);
        Tensor<S> gs(src.shape);
        const int n = in.dim(0);
        const Eigen::Index a = in.size() / n, b = src.size() / n;
        for (int k = 0; k < n; ++k) {
          gx.data.segment(k * a, a) = gy.data.segment(k * (a + b), a);
          gs.data.segment(k * b, b) = gy.data.segment(k * (a + b) + a, b);
        }
        accumulate(g[si], gs);
        break;
      }
    }
    accumulate(g[static_cast<std::size_t>(i)], gx);
  }

  BackwardResult<S> r;
  r.input_grad = std::move(g[0]);
  if (want_params) r.params = std::move(pg);
  return r;
}

template <typename S>
void init_weights(Network<S>& net, std::uint64_t seed) {
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (!l.has_params()) continue;
    const bool feeds_relu = i + 1 < layers.size() && layers[i + 1].kind == LayerKind::ReLU;
    const double taps = l.kind == LayerKind::Conv3x3 ? 9.0 : 1.0;
    const double fan_in = l.in * taps;
    const double fan_out = l.out * taps;
    const double bound = feeds_relu ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed, i);
    for (Eigen::Index k = 0; k < l.weight.size(); ++k)
      l.weight.data[k] = static_cast<S>(rng.uniform(-bound, bound));
    l.bias.data.setZero();
  }
}

template <typename S>
Network<S> build_unet(int in_ch, int base_ch, int depth, OutActivation head) {
  require(depth >= 1, "U-Net depth must be >= 1");
  require(in_ch > 0 && base_ch > 0, "U-Net channel counts must be positive");
  Network<S> net;
  net.set_spatial_multiple(1 << depth);
  auto block = [&](int cin, int cout) {
    net.conv3x3(cin, cout).relu().conv3x3(cout, cout).relu();
    return net.last_index();
  };
  std::vector<int> skips;
  int ch = in_ch;
  for (int level = 0; level < depth; ++level) {
    const int c = base_ch << level;
    skips.push_back(block(ch, c));
    net.maxpool2();
    ch = c;
  }
  block(ch, base_ch << depth);
  ch = base_ch << depth;
  for (int level = depth - 1; level >= 0; --level) {
    const int c = base_ch << level;
    net.upsample2().skip_concat(skips[static_cast<std::size_t>(level)]);
    block(ch + c, c);
    ch = c;
  }
  net.conv3x3(ch, 1);
  if (head == OutActivation::Sigmoid) net.sigmoid();
  return net;
}

template <typename S>
Network<S> build_mlp(int in, const std::vector<int>& hidden, int out, OutActivation head) {
  Network<S> net;
  int prev = in;
  for (int h : hidden) {
    net.dense(prev, h).relu();
    prev = h;
  }
  net.dense(prev, out);
  if (head == OutActivation::Sigmoid) net.sigmoid();
  return net;
}

template struct Gradients<float>;
template struct Gradients<double>;
template class Network<float>;
template class Network<double>;
template void init_weights(Network<float>&, std::uint64_t);
template void init_weights(Network<double>&, std::uint64_t);
template Network<float> build_unet<float>(int, int, int, OutActivation);
template Network<double> build_unet<double>(int, int, int, OutActivation);
template Network<float> build_mlp<float>(int, const std::vector<int>&, int, OutActivation);
template Network<double> build_mlp<double>(int, const std::vector<int>&, int, OutActivation);

}  // namespace cohnet::nn

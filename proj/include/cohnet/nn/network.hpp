#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cohnet/nn/tensor.hpp"

namespace cohnet::nn {

enum class LayerKind : std::uint8_t {
  Dense,
  Conv3x3,
  ReLU,
  Sigmoid,
  MaxPool2,
  UpsampleNearest2,
  SkipConcat,
};

const char* layer_name(LayerKind k);

/// One node of a sequential network. Parametric layers own weight and bias;
/// SkipConcat appends the output of layer `source` to its input channels.
template <typename S>
struct Layer {
  LayerKind kind = LayerKind::ReLU;
  int in = 0;
  int out = 0;
  int source = -1;
  Tensor<S> weight;
  Tensor<S> bias;

  bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv3x3; }
};

/// Per-layer parameter gradients; entries for parameter-free layers are empty.
template <typename S>
struct Gradients {
  std::vector<Tensor<S>> weight;
  std::vector<Tensor<S>> bias;

  /// Element-wise accumulate; shapes must already agree.
  Gradients& operator+=(const Gradients& o);
  Gradients& operator*=(S s);
};

/// Activations recorded by a forward pass. outputs[0] is the input,
/// outputs[i + 1] the output of layer i.
template <typename S>
struct Tape {
  std::vector<Tensor<S>> outputs;
  std::vector<std::vector<std::int32_t>> argmax;  // MaxPool2 winners
};

template <typename S>
struct BackwardResult {
  Tensor<S> input_grad;
  /// Absent for frozen networks.
  std::optional<Gradients<S>> params;
};

/// A feed-forward network with optional skip connections. Immutable during
/// forward/backward, so concurrent evaluation on separate tapes is safe.
template <typename S>
class Network {
 public:
  Network& dense(int in, int out);
  Network& conv3x3(int in_ch, int out_ch);
  Network& relu();
  Network& sigmoid();
  Network& maxpool2();
  Network& upsample2();
  Network& skip_concat(int source_layer);

  const std::vector<Layer<S>>& layers() const { return layers_; }
  std::vector<Layer<S>>& layers() { return layers_; }
  std::size_t size() const { return layers_.size(); }
  int last_index() const { return static_cast<int>(layers_.size()) - 1; }

  bool frozen() const { return frozen_; }
  void freeze(bool f = true) { frozen_ = f; }

  /// Spatial dims of image inputs must be multiples of this.
  int spatial_multiple() const { return spatial_multiple_; }
  void set_spatial_multiple(int m) { spatial_multiple_ = m; }

  Eigen::Index parameter_count() const;

  Tensor<S> forward(const Tensor<S>& x, Tape<S>* tape = nullptr) const;
  BackwardResult<S> backward(const Tape<S>& tape, const Tensor<S>& upstream) const;

  Gradients<S> zero_gradients() const;

  template <typename T>
  Network<T> cast() const {
    Network<T> n;
    n.set_spatial_multiple(spatial_multiple_);
    n.freeze(frozen_);
    for (const auto& l : layers_) {
      Layer<T> c{l.kind, l.in, l.out, l.source, l.weight.template cast<T>(),
                 l.bias.template cast<T>()};
      n.layers().push_back(std::move(c));
    }
    return n;
  }

 private:
  Network& push(Layer<S> l);
  std::vector<Layer<S>> layers_;
  bool frozen_ = false;
  int spatial_multiple_ = 1;
};

/// He-uniform weights for layers feeding a ReLU, Glorot-uniform otherwise;
/// zero biases. Deterministic in `seed`.
template <typename S>
void init_weights(Network<S>& net, std::uint64_t seed);

enum class OutActivation { Sigmoid, Identity };

/// Encoder of `depth` levels (two Conv3x3+ReLU, channels doubling from
/// base_ch, MaxPool2 between levels), a bottleneck block, a mirrored decoder
/// (UpsampleNearest2, SkipConcat, two Conv3x3+ReLU) and a 3x3 head to one
/// channel.
template <typename S>
Network<S> build_unet(int in_ch, int base_ch, int depth, OutActivation head);

/// Per-pixel MLP: in -> hidden... -> out with ReLU between layers.
template <typename S>
Network<S> build_mlp(int in, const std::vector<int>& hidden, int out, OutActivation head);

extern template struct Gradients<float>;
extern template struct Gradients<double>;
extern template class Network<float>;
extern template class Network<double>;

}  // namespace cohnet::nn

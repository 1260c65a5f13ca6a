#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "amenable/common.hpp"
#include "amenable/nn/tensor.hpp"

namespace amenable::nn {

enum class LayerKind { kDense, kConv2d, kActivation, kFlatten, kPool, kUpsample, kConcat };
enum class ActivationKind { kRelu, kSigmoid, kTanh, kIdentity };
enum class PoolKind { kMax, kAvg };

std::string to_string(LayerKind kind);
std::string to_string(ActivationKind kind);
std::string to_string(PoolKind kind);
LayerKind layer_kind_from_string(const std::string& s);
ActivationKind activation_from_string(const std::string& s);
PoolKind pool_from_string(const std::string& s);

/// Descriptor of one layer. Only the fields relevant to `kind` are read.
///
/// Convolutions use stride 1 and "same" zero padding, so they change the
/// channel count only. Pooling and upsampling change H and W by `factor`.
/// A concat layer appends activation `source` (0 = network input, i = output
/// of layer i-1) to its input along the channel axis; this is how the
/// encoder-decoder predictor carries its skip connection.
struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  std::size_t units = 0;  // dense outputs or conv output channels
  std::size_t kernel = 3;
  ActivationKind activation = ActivationKind::kIdentity;
  PoolKind pool = PoolKind::kMax;
  std::size_t factor = 2;
  std::size_t source = 0;

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv2d(std::size_t channels, std::size_t kernel = 3);
  static LayerSpec act(ActivationKind kind);
  static LayerSpec relu() { return act(ActivationKind::kRelu); }
  static LayerSpec sigmoid() { return act(ActivationKind::kSigmoid); }
  static LayerSpec tanh() { return act(ActivationKind::kTanh); }
  static LayerSpec flatten();
  static LayerSpec max_pool(std::size_t factor = 2);
  static LayerSpec avg_pool(std::size_t factor = 2);
  static LayerSpec upsample(std::size_t factor = 2);
  static LayerSpec concat(std::size_t source);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Parameter {
  std::string name;
  Tensor value;
  friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Parameter gradients, aligned index-for-index with Network::parameters().
using Gradients = std::vector<Tensor>;

class Network {
 public:
  Network() = default;
  /// Validates every layer against the shape flowing into it and allocates
  /// zero parameters. Throws ShapeError naming the first incompatible layer.
  Network(Shape input_shape, std::vector<LayerSpec> layers);

  /// Dense/conv weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  void initialize(Rng& rng);

  const Shape& input_shape() const noexcept { return shapes_.front(); }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  /// Per-sample shape of activation i (0 = input, i = output of layer i-1).
  const Shape& activation_shape(std::size_t i) const { return shapes_.at(i); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;
  /// Index of the first parameter owned by `layer`, or -1 if it has none.
  long first_parameter(std::size_t layer) const { return param_offset_.at(layer); }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Parameter> params_;
  std::vector<long> param_offset_;
};

/// Every activation of one forward pass; activations[0] is the input batch.
struct ForwardTrace {
  std::vector<Tensor> activations;
  const Tensor& output() const { return activations.back(); }
};

Tensor forward(const Network& net, const Tensor& batch);
ForwardTrace forward_trace(const Network& net, const Tensor& batch);

/// Reverse pass given dLoss/dOutput. Writes dLoss/dInput to `grad_input`
/// when it is non-null.
Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& grad_output,
                   Tensor* grad_input = nullptr);

Gradients zero_gradients(const Network& net);

}  // namespace amenable::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modulus/activation.hpp"
#include "modulus/error.hpp"
#include "modulus/io.hpp"
#include "modulus/random.hpp"
#include "modulus/tensor.hpp"

namespace modulus {

enum class Architecture : std::uint32_t { fc = 0, conv2 = 1, conv6 = 2, vgg16 = 3, custom = 4 };

constexpr std::string_view name_of(Architecture arch) {
  switch (arch) {
    case Architecture::fc: return "fc";
    case Architecture::conv2: return "conv2";
    case Architecture::conv6: return "conv6";
    case Architecture::vgg16: return "vgg16";
    case Architecture::custom: return "custom";
  }
  return "unknown";
}

constexpr std::string_view display_name_of(Architecture arch) {
  switch (arch) {
    case Architecture::fc: return "FC";
    case Architecture::conv2: return "Conv2";
    case Architecture::conv6: return "Conv6";
    case Architecture::vgg16: return "VGG16";
    case Architecture::custom: return "Custom";
  }
  return "Unknown";
}

inline Architecture parse_architecture(std::string_view name) {
  for (Architecture arch : {Architecture::fc, Architecture::conv2, Architecture::conv6, Architecture::vgg16}) {
    if (name_of(arch) == name) return arch;
  }
  throw ParameterError("unknown model '" + std::string(name) + "' (expected fc, conv2, conv6 or vgg16)");
}

struct InputShape {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// Run of 3x3 convolutions, each followed by the activation, optionally
/// closed by a 2x2 max pool.
struct ConvStage {
  std::vector<std::size_t> widths;
  bool pool = true;

  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

struct LayerPlan {
  std::vector<ConvStage> conv;
  /// Hidden dense widths; the logits layer is appended by the builder.
  std::vector<std::size_t> dense;

  friend bool operator==(const LayerPlan&, const LayerPlan&) = default;
};

/// Conv and dense widths of the four reference networks.
inline LayerPlan plan_for(Architecture arch) {
  switch (arch) {
    case Architecture::fc: return {{}, {256, 256}};
    case Architecture::conv2: return {{{{64, 64}, true}}, {256, 256}};
    case Architecture::conv6:
      return {{{{64, 64}, true}, {{128, 128}, true}, {{256, 256}, true}}, {256, 256}};
    case Architecture::vgg16:
      // The final pool of the original VGG-16 is dropped for 32x32 inputs.
      return {{{{64, 64}, true},
               {{128, 128}, true},
               {{256, 256, 256}, true},
               {{512, 512, 512}, true},
               {{512, 512, 512}, false}},
              {4096, 4096}};
    case Architecture::custom: break;
  }
  throw SpecError("custom architectures carry their own layer plan");
}

struct ModelSpec {
  Architecture architecture = Architecture::fc;
  InputShape input;
  std::size_t classes = 10;
  Activation activation;
  LayerPlan plan = plan_for(Architecture::fc);

  static ModelSpec make(Architecture arch, InputShape input, std::size_t classes, Activation activation) {
    return {arch, input, classes, activation, plan_for(arch)};
  }
  static ModelSpec custom(LayerPlan plan, InputShape input, std::size_t classes, Activation activation) {
    return {Architecture::custom, input, classes, activation, std::move(plan)};
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Rejects specs whose geometry cannot be built (odd extents at a pool,
/// empty widths, fewer than two classes).
inline void validate(const ModelSpec& spec) {
  if (spec.classes < 2) throw SpecError("need at least 2 classes, got " + std::to_string(spec.classes));
  if (spec.input.channels == 0 || spec.input.height == 0 || spec.input.width == 0) {
    throw SpecError("input extents must be positive");
  }
  if (spec.architecture != Architecture::custom && spec.plan != plan_for(spec.architecture)) {
    throw SpecError("layer plan does not match architecture " + std::string(name_of(spec.architecture)));
  }
  std::size_t h = spec.input.height, w = spec.input.width;
  for (const ConvStage& stage : spec.plan.conv) {
    for (std::size_t width : stage.widths) {
      if (width == 0) throw SpecError("conv width must be positive");
    }
    if (stage.pool) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw SpecError("input " + std::to_string(spec.input.height) + "x" + std::to_string(spec.input.width) +
                        " is unsupported by " + std::string(name_of(spec.architecture)) +
                        ": pooling reaches odd extent " + std::to_string(h) + "x" + std::to_string(w) +
                        " (pad the input)");
      }
      h /= 2;
      w /= 2;
    }
  }
  for (std::size_t width : spec.plan.dense) {
    if (width == 0) throw SpecError("dense width must be positive");
  }
}

enum class LayerKind { dense, conv3x3, maxpool2, flatten, activation };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
  /// Inputs feeding each output unit; zero for biases.
  std::size_t fan_in;
};

/// One node of the sequential layer graph. `forward` caches what `backward`
/// needs; `evaluate` is the cache-free path used for inference.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual Tensor<T> evaluate(const Tensor<T>& x) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>> parameters() { return {}; }
};

/// y = x W + b with W stored [in x out].
template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::size_t in, std::size_t out)
      : weight_({in, out}), bias_({out}), weight_grad_({in, out}), bias_grad_({out}) {}

  LayerKind kind() const override { return LayerKind::dense; }
  std::string describe() const override {
    return "dense " + std::to_string(weight_.dim(0)) + "->" + std::to_string(weight_.dim(1));
  }

  Tensor<T> evaluate(const Tensor<T>& x) const override {
    if (x.rank() != 2 || x.dim(1) != weight_.dim(0)) {
      throw DimensionError(describe() + " got input " + to_string(x.shape()));
    }
    const std::size_t batch = x.dim(0), out = weight_.dim(1);
    Tensor<T> y({batch, out});
    for (std::size_t n = 0; n < batch; ++n) std::copy(bias_.data(), bias_.data() + out, y.data() + n * out);
    detail::gemm_nn(batch, out, weight_.dim(0), x.data(), weight_.data(), y.data(), true);
    return y;
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = evaluate(x);
    input_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::size_t batch = input_.dim(0), in = weight_.dim(0), out = weight_.dim(1);
    detail::gemm_tn(in, out, batch, input_.data(), grad_out.data(), weight_grad_.data(), true);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t j = 0; j < out; ++j) bias_grad_[j] += grad_out[n * out + j];
    }
    Tensor<T> grad_in({batch, in});
    detail::gemm_nt(batch, in, out, grad_out.data(), weight_.data(), grad_in.data(), false);
    return grad_in;
  }

  std::vector<Parameter<T>> parameters() override {
    return {{"dense.weight", &weight_, &weight_grad_, weight_.dim(0)},
            {"dense.bias", &bias_, &bias_grad_, 0}};
  }

 private:
  Tensor<T> weight_, bias_, weight_grad_, bias_grad_;
  Tensor<T> input_;
};

template <typename T>
class Conv3x3Layer final : public Layer<T> {
 public:
  Conv3x3Layer(std::size_t in_channels, std::size_t filters)
      : kernels_({filters, in_channels, 3, 3}),
        bias_({filters}),
        kernels_grad_({filters, in_channels, 3, 3}),
        bias_grad_({filters}) {}

  LayerKind kind() const override { return LayerKind::conv3x3; }
  std::string describe() const override {
    return "conv3x3 " + std::to_string(kernels_.dim(1)) + "->" + std::to_string(kernels_.dim(0));
  }

  Tensor<T> evaluate(const Tensor<T>& x) const override { return conv2d(x, kernels_, bias_); }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = evaluate(x);
    input_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Conv2dGrads<T> grads = conv2d_backward(input_, kernels_, grad_out);
    for (std::size_t i = 0; i < kernels_grad_.size(); ++i) kernels_grad_[i] += grads.kernels[i];
    for (std::size_t i = 0; i < bias_grad_.size(); ++i) bias_grad_[i] += grads.bias[i];
    return std::move(grads.input);
  }

  std::vector<Parameter<T>> parameters() override {
    return {{"conv.kernels", &kernels_, &kernels_grad_, kernels_.dim(1) * 9},
            {"conv.bias", &bias_, &bias_grad_, 0}};
  }

 private:
  Tensor<T> kernels_, bias_, kernels_grad_, bias_grad_;
  Tensor<T> input_;
};

template <typename T>
class MaxPool2Layer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::maxpool2; }
  std::string describe() const override { return "maxpool2"; }

  Tensor<T> evaluate(const Tensor<T>& x) const override { return maxpool2(x).output; }

  Tensor<T> forward(const Tensor<T>& x) override {
    PoolResult<T> pooled = maxpool2(x);
    argmax_ = std::move(pooled.argmax);
    input_shape_ = x.shape();
    return std::move(pooled.output);
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    return maxpool2_backward(grad_out, argmax_, input_shape_);
  }

 private:
  std::vector<std::size_t> argmax_;
  Shape input_shape_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  std::string describe() const override { return "flatten"; }

  Tensor<T> evaluate(const Tensor<T>& x) const override {
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor<T> forward(const Tensor<T>& x) override {
    input_shape_ = x.shape();
    return evaluate(x);
  }
  Tensor<T> backward(const Tensor<T>& grad_out) override { return grad_out.reshaped(input_shape_); }

 private:
  Shape input_shape_;
};

/// Elementwise nonlinearity. The derivative computed alongside the value in
/// forward is the only thing backward reads.
template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation activation) : activation_(activation) {}

  LayerKind kind() const override { return LayerKind::activation; }
  std::string describe() const override { return "activation " + std::string(name_of(activation_.kind())); }
  const Activation& activation() const noexcept { return activation_; }

  Tensor<T> evaluate(const Tensor<T>& x) const override { return apply(activation_, x).value; }

  Tensor<T> forward(const Tensor<T>& x) override {
    ActivationOut<T> out = apply(activation_, x);
    derivative_ = std::move(out.derivative);
    input_ = x;
    return std::move(out.value);
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> grad_in(grad_out.shape());
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = grad_out[i] * derivative_[i];
    return grad_in;
  }

  const Tensor<T>& cached_derivative() const noexcept { return derivative_; }
  /// Pre-activation values seen by the last forward.
  const Tensor<T>& cached_input() const noexcept { return input_; }

 private:
  Activation activation_;
  Tensor<T> derivative_;
  Tensor<T> input_;
};

/// Sequential network built from a ModelSpec. Single owner while training;
/// `infer` leaves the layer caches untouched and may run concurrently.
template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    std::size_t channels = spec_.input.channels;
    std::size_t h = spec_.input.height, w = spec_.input.width;
    for (const ConvStage& stage : spec_.plan.conv) {
      for (std::size_t width : stage.widths) {
        layers_.push_back(std::make_unique<Conv3x3Layer<T>>(channels, width));
        layers_.push_back(std::make_unique<ActivationLayer<T>>(spec_.activation));
        channels = width;
      }
      if (stage.pool) {
        layers_.push_back(std::make_unique<MaxPool2Layer<T>>());
        h /= 2;
        w /= 2;
      }
    }
    layers_.push_back(std::make_unique<FlattenLayer<T>>());
    std::size_t features = channels * h * w;
    for (std::size_t width : spec_.plan.dense) {
      layers_.push_back(std::make_unique<DenseLayer<T>>(features, width));
      layers_.push_back(std::make_unique<ActivationLayer<T>>(spec_.activation));
      features = width;
    }
    layers_.push_back(std::make_unique<DenseLayer<T>>(features, spec_.classes));
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  /// Parameters in declaration order (weights before bias, input to output).
  std::vector<Parameter<T>> parameters() {
    std::vector<Parameter<T>> params;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (Parameter<T>& p : layers_[i]->parameters()) {
        p.name = "layer" + std::to_string(i) + "." + p.name;
        params.push_back(std::move(p));
      }
    }
    return params;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers_) {
      for (const Parameter<T>& p : layer->parameters()) total += p.value->size();
    }
    return total;
  }

  void zero_grad() {
    for (Parameter<T>& p : parameters()) p.grad->fill(T{0});
  }

  /// Uniform fan-in initialization U(-sqrt(1/fan_in), sqrt(1/fan_in)) for
  /// weights, zero biases, drawn in declaration order from `seed`.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (Parameter<T>& p : parameters()) {
      if (p.fan_in == 0) {
        p.value->fill(T{0});
        continue;
      }
      const double limit = std::sqrt(1.0 / static_cast<double>(p.fan_in));
      for (T& v : p.value->values()) v = static_cast<T>(rng.uniform(-limit, limit));
    }
  }

  Tensor<T> forward(const Tensor<T>& batch) {
    return run(batch, [](Layer<T>& layer, const Tensor<T>& x) { return layer.forward(x); });
  }
  Tensor<T> infer(const Tensor<T>& batch) const {
    return run(batch, [](const Layer<T>& layer, const Tensor<T>& x) { return layer.evaluate(x); });
  }

  void backward(const Tensor<T>& grad_logits) {
    Tensor<T> grad = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) grad = layers_[i]->backward(grad);
  }

 private:
  template <typename Step>
  Tensor<T> run(const Tensor<T>& batch, Step step) const {
    const Shape expected_tail{spec_.input.channels, spec_.input.height, spec_.input.width};
    if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expected_tail) {
      throw DimensionError("model expects N x " + to_string(expected_tail) + " input, got " +
                           to_string(batch.shape()));
    }
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string where = "layer " + std::to_string(i) + " (" + layers_[i]->describe() + ")";
      try {
        x = step(*layers_[i], x);
        check_finite(x, where);
      } catch (const NumericError& e) {
        const std::string msg = e.what();
        if (msg.find(where) != std::string::npos) throw;
        throw NumericError(where + ": " + msg);
      }
    }
    return x;
  }

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
Model<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  Model<T> model(spec);
  model.initialize(seed);
  return model;
}

template <typename T>
struct LossAndGrad {
  double loss;
  Tensor<T> grad;
};

/// Mean softmax cross-entropy over the batch and its gradient
/// (softmax - onehot) / N with respect to the logits.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("logits " + to_string(logits.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  LossAndGrad<T> out{0.0, Tensor<T>(logits.shape())};
  const T inv_batch = T{1} / static_cast<T>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
    const T* row = logits.data() + n * classes;
    T* grow = out.grad.data() + n * classes;
    const T peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(row[c] - peak));
    const double log_denom = std::log(denom);
    out.loss += log_denom - static_cast<double>(row[label] - peak);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(row[c] - peak) - log_denom);
      grow[c] = static_cast<T>(p) * inv_batch;
    }
    grow[label] -= inv_batch;
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

/// Mean cross-entropy of `logits` (from the last `model.forward`) and
/// backpropagation of its gradient into every parameter gradient.
template <typename T>
double loss_and_backward(Model<T>& model, const Tensor<T>& logits, std::span<const int> labels) {
  LossAndGrad<T> lg = softmax_cross_entropy(logits, labels);
  model.backward(lg.grad);
  return lg.loss;
}

/// Argmax with the lowest index winning ties.
template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  const std::size_t classes = logits.dim(1);
  const T* r = logits.data() + row * classes;
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (r[c] > r[best]) best = c;
  }
  return best;
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("logits " + to_string(logits.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (static_cast<int>(argmax_row(logits, n)) == labels[n]) ++correct;
  }
  return correct;
}

template <typename T>
double accuracy(const Tensor<T>& logits, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  return static_cast<double>(count_correct(logits, labels)) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Checkpoints: "MODG", u32 version, spec descriptor, then every parameter
// tensor in declaration order as u32 rank, u32 extents, f32 values. All
// integers and floats little-endian.

inline constexpr std::string_view checkpoint_magic = "MODG";
inline constexpr std::uint32_t checkpoint_version = 1;

inline void write_spec(ByteWriter& out, const ModelSpec& spec) {
  out.u32(static_cast<std::uint32_t>(spec.architecture));
  out.u32(static_cast<std::uint32_t>(spec.input.channels));
  out.u32(static_cast<std::uint32_t>(spec.input.height));
  out.u32(static_cast<std::uint32_t>(spec.input.width));
  out.u32(static_cast<std::uint32_t>(spec.classes));
  out.u32(static_cast<std::uint32_t>(spec.activation.kind()));
  out.f64(spec.activation.beta());
  out.u32(static_cast<std::uint32_t>(spec.plan.conv.size()));
  for (const ConvStage& stage : spec.plan.conv) {
    out.u32(static_cast<std::uint32_t>(stage.widths.size()));
    for (std::size_t w : stage.widths) out.u32(static_cast<std::uint32_t>(w));
    out.u8(stage.pool ? 1 : 0);
  }
  out.u32(static_cast<std::uint32_t>(spec.plan.dense.size()));
  for (std::size_t w : spec.plan.dense) out.u32(static_cast<std::uint32_t>(w));
}

inline ModelSpec read_spec(ByteReader& in) {
  ModelSpec spec;
  const std::uint32_t arch = in.u32();
  if (arch > static_cast<std::uint32_t>(Architecture::custom)) in.fail("unknown architecture tag " + std::to_string(arch));
  spec.architecture = static_cast<Architecture>(arch);
  spec.input.channels = in.u32();
  spec.input.height = in.u32();
  spec.input.width = in.u32();
  spec.classes = in.u32();
  const std::uint32_t kind = in.u32();
  if (kind >= all_activation_kinds.size()) in.fail("unknown activation tag " + std::to_string(kind));
  spec.activation = Activation::unchecked(static_cast<ActivationKind>(kind), in.f64());
  spec.plan = {};
  const std::uint32_t stages = in.u32();
  for (std::uint32_t s = 0; s < stages; ++s) {
    ConvStage stage;
    const std::uint32_t n = in.u32();
    for (std::uint32_t i = 0; i < n; ++i) stage.widths.push_back(in.u32());
    stage.pool = in.u8() != 0;
    spec.plan.conv.push_back(std::move(stage));
  }
  const std::uint32_t dense = in.u32();
  for (std::uint32_t i = 0; i < dense; ++i) spec.plan.dense.push_back(in.u32());
  return spec;
}

template <typename T>
std::string encode_checkpoint(Model<T>& model) {
  ByteWriter out;
  out.bytes(checkpoint_magic);
  out.u32(checkpoint_version);
  write_spec(out, model.spec());
  const auto params = model.parameters();
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter<T>& p : params) {
    out.u32(static_cast<std::uint32_t>(p.value->rank()));
    for (std::size_t extent : p.value->shape()) out.u32(static_cast<std::uint32_t>(extent));
    for (T v : p.value->values()) out.f32(static_cast<float>(v));
  }
  return out.buffer();
}

template <typename T>
Model<T> decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint") {
  ByteReader in(bytes, source);
  if (in.bytes(4) != checkpoint_magic) in.fail("bad magic, expected MODG");
  const std::uint32_t version = in.u32();
  if (version != checkpoint_version) in.fail("unsupported checkpoint version " + std::to_string(version));
  ModelSpec spec;
  try {
    spec = read_spec(in);
    validate(spec);
  } catch (const SpecError& e) {
    in.fail(std::string("invalid model descriptor: ") + e.what());
  }
  Model<T> model(spec);
  auto params = model.parameters();
  const std::uint32_t count = in.u32();
  if (count != params.size()) {
    in.fail("descriptor implies " + std::to_string(params.size()) + " tensors, file has " + std::to_string(count));
  }
  for (Parameter<T>& p : params) {
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& extent : shape) extent = in.u32();
    if (shape != p.value->shape()) {
      in.fail(p.name + " has shape " + to_string(shape) + ", expected " + to_string(p.value->shape()));
    }
    for (T& v : p.value->values()) v = static_cast<T>(in.f32());
  }
  if (!in.at_end()) in.fail("trailing bytes after last tensor");
  return model;
}

template <typename T>
void save_checkpoint(Model<T>& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(model));
}

template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file_text(path), path.string());
}

}  // namespace modulus

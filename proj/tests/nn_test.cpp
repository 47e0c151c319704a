#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "modulus/gradcheck.hpp"
#include "modulus/nn.hpp"
#include "modulus/train.hpp"
#include "support.hpp"

using namespace modulus;

namespace {

std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t conv_params(std::size_t in, std::size_t out) { return in * out * 9 + out; }

}  // namespace

TEST(ParameterCount, ReferenceArchitectures) {
  const auto count = [](Architecture arch, InputShape in, std::size_t classes) {
    return Model<float>(ModelSpec::make(arch, in, classes, Activation())).parameter_count();
  };
  EXPECT_EQ(count(Architecture::fc, {1, 28, 28}, 10), 269'322u);
  EXPECT_EQ(count(Architecture::fc, {1, 28, 28}, 10),
            dense_params(784, 256) + dense_params(256, 256) + dense_params(256, 10));
  EXPECT_EQ(count(Architecture::fc, {3, 32, 32}, 100), 878'180u);

  const std::size_t conv2 = conv_params(3, 64) + conv_params(64, 64) + dense_params(64 * 16 * 16, 256) +
                            dense_params(256, 256) + dense_params(256, 10);
  EXPECT_EQ(count(Architecture::conv2, {3, 32, 32}, 10), conv2);
  EXPECT_EQ(conv2, 4'301'642u);

  const std::size_t conv6 = conv_params(3, 64) + conv_params(64, 64) + conv_params(64, 128) +
                            conv_params(128, 128) + conv_params(128, 256) + conv_params(256, 256) +
                            dense_params(256 * 4 * 4, 256) + dense_params(256, 256) + dense_params(256, 10);
  EXPECT_EQ(count(Architecture::conv6, {3, 32, 32}, 10), conv6);
  EXPECT_EQ(conv6, 2'262'602u);

  EXPECT_EQ(count(Architecture::conv2, {1, 28, 28}, 10), 3'317'450u);

  const std::size_t vgg = count(Architecture::vgg16, {3, 32, 32}, 10);
  EXPECT_GE(vgg, 33'600'000u);
  EXPECT_LE(vgg, 40'300'000u);
}

TEST(ModelSpec, UnsupportedGeometryIsSpecError) {
  EXPECT_THROW(Model<float>(ModelSpec::make(Architecture::conv6, {1, 28, 28}, 10, Activation())), SpecError);
  EXPECT_NO_THROW(Model<float>(ModelSpec::make(Architecture::conv2, {1, 28, 28}, 10, Activation())));
  EXPECT_THROW(Model<float>(ModelSpec::make(Architecture::fc, {1, 28, 28}, 1, Activation())), SpecError);
}

TEST(ModelSpec, ActivationAfterEveryHiddenLayerOnly) {
  Model<float> m(ModelSpec::make(Architecture::conv2, {3, 32, 32}, 10, Activation()));
  std::vector<LayerKind> kinds;
  for (std::size_t i = 0; i < m.layer_count(); ++i) kinds.push_back(m.layer(i).kind());
  const std::vector<LayerKind> expected = {LayerKind::conv3x3, LayerKind::activation, LayerKind::conv3x3,
                                           LayerKind::activation, LayerKind::maxpool2, LayerKind::flatten,
                                           LayerKind::dense, LayerKind::activation, LayerKind::dense,
                                           LayerKind::activation, LayerKind::dense};
  EXPECT_EQ(kinds, expected);
}

TEST(PrepareFor, PadsMnistOnlyWhenPoolingNeedsIt) {
  const Dataset data = fixtures::synthetic_mnist(20, 10);
  EXPECT_EQ(prepare_for(data, Architecture::fc).image, (InputShape{1, 28, 28}));
  EXPECT_EQ(prepare_for(data, Architecture::conv2).image, (InputShape{1, 28, 28}));
  const Dataset padded = prepare_for(data, Architecture::conv6);
  EXPECT_EQ(padded.image, (InputShape{1, 32, 32}));
  // Two-pixel border of background bytes, original image in the middle.
  EXPECT_EQ(padded.train.pixels[0], 0);
  EXPECT_EQ(padded.train.pixels[2 * 32 + 2], data.train.pixels[0]);
  EXPECT_EQ(padded.train.pixels[(2 + 27) * 32 + 2 + 27], data.train.pixels[27 * 28 + 27]);
}

TEST(Init, DeterministicAndWithinFanInBounds) {
  const ModelSpec spec = ModelSpec::make(Architecture::fc, {1, 28, 28}, 10, Activation());
  Model<float> a = build_model<float>(spec, 11), b = build_model<float>(spec, 11), c = build_model<float>(spec, 12);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
  EXPECT_NE(encode_checkpoint(a), encode_checkpoint(c));
  for (const Parameter<float>& p : a.parameters()) {
    if (p.fan_in == 0) {
      for (float v : p.value->values()) EXPECT_EQ(v, 0.0f);
      continue;
    }
    const float limit = static_cast<float>(std::sqrt(1.0 / static_cast<double>(p.fan_in)));
    for (float v : p.value->values()) EXPECT_LE(std::abs(v), limit);
  }
}

TEST(Forward, ZeroWeightsGiveBias) {
  Model<double> m(ModelSpec::make(Architecture::fc, {1, 28, 28}, 10, Activation()));
  auto params = m.parameters();
  params.back().value->values()[3] = 0.75;
  Tensor<double> x({2, 1, 28, 28}, 0.3);
  const auto logits = m.forward(x);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(logits.at({n, c}), c == 3 ? 0.75 : 0.0);
  }
}

TEST(Forward, HandSetToyNet) {
  // 3 inputs -> 2 hidden (modulus) -> 2 logits.
  Model<double> m(ModelSpec::custom({{}, {2}}, {1, 1, 3}, 2, Activation()));
  auto p = m.parameters();
  *p[0].value = Tensor<double>({3, 2}, {1, -1, 2, 0, -1, 1});
  *p[1].value = Tensor<double>({2}, {0.5, -0.5});
  *p[2].value = Tensor<double>({2, 2}, {1, 2, 3, 4});
  *p[3].value = Tensor<double>({2}, {0.0, 1.0});
  const Tensor<double> x({1, 1, 1, 3}, {1, 2, 3});
  // hidden pre = [1+4-3+0.5, -1+0+3-0.5] = [2.5, 1.5]; modulus keeps it.
  // logits = [2.5*1 + 1.5*3, 2.5*2 + 1.5*4 + 1] = [7, 12]
  const auto logits = m.forward(x);
  EXPECT_EQ(logits[0], 7.0);
  EXPECT_EQ(logits[1], 12.0);
  const Tensor<double> neg({1, 1, 1, 3}, {-1, -2, -3});
  // pre = [-1-4+3+0.5, 1+0-3-0.5] = [-1.5, -2.5] -> [1.5, 2.5]; logits = [9, 14]
  const auto l2 = m.forward(neg);
  EXPECT_EQ(l2[0], 9.0);
  EXPECT_EQ(l2[1], 14.0);
}

TEST(Forward, ModulusNetIsEvenWithoutBiases) {
  Model<double> m = build_model<double>(ModelSpec::make(Architecture::fc, {1, 28, 28}, 10, Activation()), 5);
  Rng rng(9);
  Tensor<double> x({3, 1, 28, 28});
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  Tensor<double> neg = x;
  for (double& v : neg.values()) v = -v;
  m.forward(x);
  const Tensor<double> hidden = m.layer(2).evaluate(m.layer(1).evaluate(m.layer(0).evaluate(x)));
  const Tensor<double> hidden_neg = m.layer(2).evaluate(m.layer(1).evaluate(m.layer(0).evaluate(neg)));
  EXPECT_EQ(hidden, hidden_neg);
  EXPECT_EQ(m.infer(x), m.infer(neg));
}

TEST(Forward, ShapeMismatchAndNonFiniteNameTheProblem) {
  Model<float> m = build_model<float>(ModelSpec::make(Architecture::fc, {1, 28, 28}, 10, Activation()), 1);
  EXPECT_THROW(m.forward(Tensor<float>({2, 1, 28, 27})), DimensionError);
  m.parameters()[2].value->values()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    m.forward(Tensor<float>({1, 1, 28, 28}, 0.5f));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3 (dense 256->256)"), std::string::npos) << e.what();
  }
}

TEST(Loss, UniformLogitsGiveLogClasses) {
  const Tensor<double> logits({3, 10}, 0.25);
  const std::vector<int> labels = {0, 4, 9};
  const auto lg = softmax_cross_entropy(logits, labels);
  EXPECT_NEAR(lg.loss, std::log(10.0), 1e-15);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t c = 0; c < 10; ++c) {
      const double expected = (0.1 - (static_cast<int>(c) == labels[n] ? 1.0 : 0.0)) / 3.0;
      EXPECT_NEAR(lg.grad.at({n, c}), expected, 1e-15);
    }
  }
}

TEST(Loss, LargeMarginApproachesZero) {
  Tensor<double> logits({1, 10});
  logits[7] = 200.0;
  EXPECT_LT(softmax_cross_entropy(logits, std::vector<int>{7}).loss, 1e-80);
  EXPECT_NEAR(softmax_cross_entropy(logits, std::vector<int>{2}).loss, 200.0, 1e-9);
}

TEST(Loss, LabelOutOfRangeIsDataError) {
  const Tensor<double> logits({1, 3});
  EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{3}), DataError);
  EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{-1}), DataError);
}

TEST(Accuracy, Counting) {
  Tensor<double> eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at({i, i}) = 1.0;
  EXPECT_EQ(accuracy(eye, std::vector<int>{0, 1, 2, 3}), 1.0);
  EXPECT_EQ(accuracy(eye, std::vector<int>{1, 2, 3, 0}), 0.0);
  EXPECT_EQ(accuracy(eye, std::vector<int>{0, 1, 2, 0}), 0.75);
  const Tensor<double> tied({1, 3}, 2.0);
  EXPECT_EQ(argmax_row(tied, 0), 0u);
}

TEST(Backward, ActivationLayerMultipliesByCachedDerivative) {
  for (ActivationKind kind : all_activation_kinds) {
    ActivationLayer<double> layer{Activation(kind)};
    Rng rng(3);
    Tensor<double> x({4, 5}), g({4, 5});
    for (double& v : x.values()) v = rng.uniform(-2.0, 2.0);
    for (double& v : g.values()) v = rng.uniform(-1.0, 1.0);
    layer.forward(x);
    const auto gi = layer.backward(g);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(gi[i], g[i] * layer.cached_derivative()[i]);
  }
}

TEST(Backward, GradientsMatchFiniteDifferences) {
  for (TinyNet net : {TinyNet::fc, TinyNet::conv}) {
    for (ActivationKind kind : all_activation_kinds) {
      const ModelGradCheck r = check_model_gradients(net, Activation(kind));
      EXPECT_TRUE(r.passed) << r.net << " " << name_of(kind) << " rel " << r.max_rel_error << " at "
                            << r.worst_parameter;
      EXPECT_GT(r.checked, 100u);
    }
  }
}

TEST(Backward, GradientShapesMatchParameters) {
  Model<float> m = build_model<float>(ModelSpec::make(Architecture::conv2, {3, 32, 32}, 10, Activation()), 0);
  for (const Parameter<float>& p : m.parameters()) EXPECT_EQ(p.value->shape(), p.grad->shape()) << p.name;
}

TEST(DyingNeurons, ReluStarvesModulusDoesNot) {
  // Hidden unit 0 sees only negative pre-activations: all inputs are
  // positive and its incoming weights are negative.
  const auto run = [](ActivationKind kind) {
    Model<double> m(ModelSpec::custom({{}, {4}}, {1, 1, 6}, 3, Activation(kind)));
    m.initialize(2);
    auto p = m.parameters();
    for (std::size_t i = 0; i < 6; ++i) p[0].value->at({i, 0}) = -0.5;
    Tensor<double> x({5, 1, 1, 6});
    Rng rng(4);
    for (double& v : x.values()) v = rng.uniform(0.1, 1.0);
    m.zero_grad();
    const auto logits = m.forward(x);
    loss_and_backward(m, logits, std::vector<int>{0, 1, 2, 0, 1});
    const auto& act = dynamic_cast<const ActivationLayer<double>&>(m.layer(2));
    double grad_norm = 0.0;
    for (std::size_t i = 0; i < 6; ++i) grad_norm += std::abs(p[0].grad->at({i, 0}));
    grad_norm += std::abs((*p[1].grad)[0]);
    bool any_zero_derivative = false;
    for (double d : act.cached_derivative().values()) any_zero_derivative |= d == 0.0;
    return std::pair{grad_norm, any_zero_derivative};
  };
  const auto [relu_norm, relu_zero] = run(ActivationKind::relu);
  EXPECT_EQ(relu_norm, 0.0);
  EXPECT_TRUE(relu_zero);
  const auto [mod_norm, mod_zero] = run(ActivationKind::modulus);
  EXPECT_GT(mod_norm, 0.0);
  EXPECT_FALSE(mod_zero);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelSpec spec = ModelSpec::make(Architecture::conv2, {3, 32, 32}, 10, Activation(ActivationKind::soft_modulus_t, 0.05));
  Model<float> m = build_model<float>(spec, 21);
  fixtures::TempDir dir;
  save_checkpoint(m, dir / "m.modg");
  Model<float> back = load_checkpoint<float>(dir / "m.modg");
  EXPECT_EQ(back.spec(), spec);
  auto a = m.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value) << a[i].name;
  EXPECT_EQ(encode_checkpoint(back), read_file_text(dir / "m.modg"));
}

TEST(Checkpoint, CorruptionIsFormatError) {
  Model<float> m = build_model<float>(ModelSpec::make(Architecture::fc, {1, 28, 28}, 10, Activation()), 0);
  const std::string bytes = encode_checkpoint(m);
  EXPECT_EQ(bytes.substr(0, 4), "MODG");
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(bad), FormatError);
  EXPECT_THROW(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_checkpoint<float>(bytes + "x"), FormatError);
  bad = bytes;
  bad[4] = 9;  // version
  EXPECT_THROW(decode_checkpoint<float>(bad), FormatError);
}

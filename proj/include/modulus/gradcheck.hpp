#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modulus/activation.hpp"
#include "modulus/nn.hpp"
#include "modulus/random.hpp"
#include "modulus/tensor.hpp"

namespace modulus {

// ---------------------------------------------------------------------------
// Activation derivatives against central finite differences.

struct ActivationGrid {
  double low = -5.0;
  double high = 5.0;
  double spacing = 1e-3;
  double h = 1e-6;
  /// Grid points this close to a kink are skipped.
  double kink_margin = 1e-3;
  double tolerance = 1e-6;
};

struct ConventionPoint {
  double x;
  double derivative;
};

struct ActivationCheck {
  Activation activation;
  double max_error = 0.0;
  double worst_x = 0.0;
  std::size_t points = 0;
  std::size_t excluded = 0;
  /// Derivative values imposed by convention at the excluded kinks.
  std::vector<ConventionPoint> conventions;
  bool passed = true;
};

/// `corrupt` perturbs the analytic derivative of one kind by 1e-3; it exists
/// so the check can be shown to fail.
inline ActivationCheck check_activation(const Activation& act, const ActivationGrid& grid = {},
                                        std::optional<ActivationKind> corrupt = std::nullopt) {
  ActivationCheck out{act, 0.0, 0.0, 0, 0, {}, true};
  const std::vector<double> kinks = kink_points(act.kind());
  for (double k : kinks) out.conventions.push_back({k, evaluate(act, k).derivative});
  const auto count = static_cast<std::size_t>(std::llround((grid.high - grid.low) / grid.spacing));
  for (std::size_t i = 0; i <= count; ++i) {
    const double x = grid.low + static_cast<double>(i) * grid.spacing;
    const bool near_kink = std::any_of(kinks.begin(), kinks.end(), [&](double k) {
      return std::abs(x - k) <= grid.kink_margin * (1.0 + 1e-9);
    });
    if (near_kink) {
      ++out.excluded;
      continue;
    }
    double analytic = evaluate(act, x).derivative;
    if (corrupt && *corrupt == act.kind()) analytic += 1e-3;
    const double numeric = (evaluate(act, x + grid.h).value - evaluate(act, x - grid.h).value) / (2.0 * grid.h);
    const double err = std::abs(analytic - numeric);
    ++out.points;
    if (err > out.max_error || std::isnan(err)) {
      out.max_error = err;
      out.worst_x = x;
    }
  }
  out.passed = out.max_error <= grid.tolerance;
  return out;
}

inline std::vector<ActivationCheck> check_all_activations(const ActivationGrid& grid = {},
                                                          std::optional<ActivationKind> corrupt = std::nullopt) {
  std::vector<ActivationCheck> out;
  for (ActivationKind kind : all_activation_kinds) out.push_back(check_activation(Activation(kind), grid, corrupt));
  return out;
}

// ---------------------------------------------------------------------------
// Whole-model parameter gradients against central finite differences of the
// loss, in double precision.

enum class TinyNet { fc, conv };

inline std::string_view name_of(TinyNet net) { return net == TinyNet::fc ? "fc-tiny" : "conv-tiny"; }

/// Dense 8,8 on a 1x4x4 input, or conv 4,4 + pool then dense 8,8 on 2x6x6;
/// three classes either way.
inline ModelSpec tiny_spec(TinyNet net, const Activation& act) {
  if (net == TinyNet::fc) return ModelSpec::custom({{}, {8, 8}}, {1, 4, 4}, 3, act);
  return ModelSpec::custom({{{{4, 4}, true}}, {8, 8}}, {2, 6, 6}, 3, act);
}

struct ModelGradSettings {
  std::size_t batch = 3;
  /// Finite-difference step, scaled by max(1, |w|). The stencil is the
  /// fourth-order central one: the second-order stencil's h^2 error is too
  /// large for softmodulust at beta = 0.01, whose curvature scales as 1/beta.
  double h = 1e-4;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
  /// A draw is rejected when a pre-activation lies this close to a kink or a
  /// pool window's two largest inputs are this close, since a finite
  /// difference across a kink is meaningless.
  double kink_margin = 1e-3;
  std::size_t max_draws = 64;
};

struct ModelGradCheck {
  std::string net;
  Activation activation;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  /// Random draws rejected for landing near a kink before one was accepted.
  std::size_t rejected_draws = 0;
  bool passed = false;
};

namespace detail {

/// True when the last forward pass put some intermediate close enough to a
/// non-differentiable point to spoil a finite difference.
inline bool near_kink(Model<double>& model, double margin) {
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    Layer<double>& layer = model.layer(i);
    if (auto* act = dynamic_cast<ActivationLayer<double>*>(&layer)) {
      const std::vector<double> kinks = kink_points(act->activation().kind());
      for (double x : act->cached_input().values()) {
        for (double k : kinks) {
          if (std::abs(x - k) < margin) return true;
        }
      }
    }
    if (layer.kind() == LayerKind::maxpool2 && i > 0) {
      auto* act = dynamic_cast<ActivationLayer<double>*>(&model.layer(i - 1));
      if (act == nullptr) continue;
      const ActivationOut<double> x = apply(act->activation(), act->cached_input());
      const std::size_t n = x.value.dim(0), c = x.value.dim(1), h = x.value.dim(2), w = x.value.dim(3);
      for (std::size_t plane = 0; plane < n * c; ++plane) {
        const std::size_t base = plane * h * w;
        for (std::size_t y = 0; y < h; y += 2) {
          for (std::size_t xx = 0; xx < w; xx += 2) {
            std::size_t idx[4] = {base + y * w + xx, base + y * w + xx + 1, base + (y + 1) * w + xx,
                                  base + (y + 1) * w + xx + 1};
            std::sort(idx, idx + 4, [&](std::size_t a, std::size_t b) { return x.value[a] < x.value[b]; });
            // Entries pinned flat (zero derivative, e.g. ReLU zeros) cannot swap order.
            const bool frozen = x.derivative[idx[3]] == 0.0 && x.derivative[idx[2]] == 0.0;
            if (!frozen && x.value[idx[3]] - x.value[idx[2]] < margin) return true;
          }
        }
      }
    }
  }
  return false;
}

}  // namespace detail

inline ModelGradCheck check_model_gradients(TinyNet net, const Activation& act, std::uint64_t seed = 0,
                                            const ModelGradSettings& settings = {}) {
  ModelGradCheck out{std::string(name_of(net)), act, 0.0, {}, 0, 0, false};
  const ModelSpec spec = tiny_spec(net, act);
  for (std::size_t draw = 0; draw < settings.max_draws; ++draw) {
    Rng rng = Rng::derived(seed, draw);
    Model<double> model = build_model<double>(spec, rng.next());
    Tensor<double> input({settings.batch, spec.input.channels, spec.input.height, spec.input.width});
    for (double& v : input.values()) v = rng.normal();
    std::vector<int> labels(settings.batch);
    for (int& l : labels) l = static_cast<int>(rng.below(spec.classes));

    model.zero_grad();
    const Tensor<double> logits = model.forward(input);
    if (detail::near_kink(model, settings.kink_margin)) {
      ++out.rejected_draws;
      continue;
    }
    loss_and_backward(model, logits, labels);

    const auto loss_at = [&] { return softmax_cross_entropy(model.infer(input), labels).loss; };
    for (Parameter<double>& p : model.parameters()) {
      for (std::size_t j = 0; j < p.value->size(); ++j) {
        double& w = (*p.value)[j];
        const double saved = w;
        const double step = settings.h * std::max(1.0, std::abs(saved));
        const auto loss_with = [&](double offset) {
          w = saved + offset;
          return loss_at();
        };
        // Fourth-order central stencil.
        const double numeric = (8.0 * (loss_with(step) - loss_with(-step)) - (loss_with(2.0 * step) - loss_with(-2.0 * step))) /
                               (12.0 * step);
        w = saved;
        const double analytic = (*p.grad)[j];
        const double rel =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), settings.floor});
        ++out.checked;
        if (rel > out.max_rel_error || std::isnan(rel)) {
          out.max_rel_error = rel;
          out.worst_parameter = p.name + "[" + std::to_string(j) + "]";
        }
      }
    }
    out.passed = out.max_rel_error <= settings.tolerance;
    return out;
  }
  out.worst_parameter = "no draw cleared the kink margin";
  return out;
}

}  // namespace modulus

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "modulus/error.hpp"
#include "modulus/io.hpp"
#include "modulus/nn.hpp"
#include "modulus/tensor.hpp"

namespace modulus {

/// Linear warmup from `warmup_start_lr` to `base_lr`, then cosine annealing
/// down to `final_lr`, evaluated per optimizer step.
struct LrSchedule {
  double base_lr = 1e-4;
  double warmup_start_lr = 1e-5;
  double final_lr = 1e-6;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 100;
  std::size_t steps_per_epoch = 1;

  std::size_t warmup_steps() const noexcept { return warmup_epochs * steps_per_epoch; }
  std::size_t total_steps() const noexcept { return total_epochs * steps_per_epoch; }

  void validate() const {
    if (!(base_lr > 0.0 && warmup_start_lr > 0.0 && final_lr > 0.0)) {
      throw ParameterError("learning rates must be positive");
    }
    if (warmup_start_lr > base_lr) throw ParameterError("warmup start lr exceeds base lr");
    if (final_lr > base_lr) throw ParameterError("final lr exceeds base lr");
    if (total_epochs == 0 || steps_per_epoch == 0) throw ParameterError("schedule needs at least one step");
    if (warmup_epochs >= total_epochs) {
      throw ParameterError("warmup epochs (" + std::to_string(warmup_epochs) + ") must be fewer than total epochs (" +
                           std::to_string(total_epochs) + ")");
    }
  }
};

/// Learning rate at a zero-based global step.
///
/// Warmup covers steps [0, W) and reaches base_lr exactly on step W-1; the
/// cosine span runs from step W (progress 0, base_lr) to the final step
/// (progress 1, final_lr).
inline double lr_at(const LrSchedule& schedule, std::size_t step) {
  schedule.validate();
  const std::size_t total = schedule.total_steps();
  if (step >= total) {
    throw ParameterError("step " + std::to_string(step) + " outside schedule of " + std::to_string(total) + " steps");
  }
  const std::size_t warmup = schedule.warmup_steps();
  if (step < warmup) {
    const double t = warmup > 1 ? static_cast<double>(step) / static_cast<double>(warmup - 1) : 1.0;
    return std::lerp(schedule.warmup_start_lr, schedule.base_lr, t);
  }
  const std::size_t span = total - 1 - warmup;
  const double progress = span == 0 ? 1.0 : static_cast<double>(step - warmup) / static_cast<double>(span);
  return schedule.final_lr +
         0.5 * (schedule.base_lr - schedule.final_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// First and second moments per parameter tensor plus the step counter.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<Parameter<T>>& params, AdamHyper hyper = {}) {
  AdamState<T> state;
  state.hyper = hyper;
  for (const Parameter<T>& p : params) {
    state.first_moment.emplace_back(p.value->shape());
    state.second_moment.emplace_back(p.value->shape());
  }
  return state;
}

/// One bias-corrected Adam update of every parameter from its gradient.
template <typename T>
void adam_apply(AdamState<T>& state, const std::vector<Parameter<T>>& params, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be positive, got " + std::to_string(lr));
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("adam state tracks " + std::to_string(state.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad->shape() != state.first_moment[i].shape() ||
        params[i].value->shape() != state.first_moment[i].shape()) {
      throw DimensionError("adam moment " + std::to_string(i) + " has shape " +
                           to_string(state.first_moment[i].shape()) + ", parameter " + params[i].name + " has " +
                           to_string(params[i].value->shape()));
    }
    check_finite(*params[i].grad, "gradient of " + params[i].name);
  }

  ++state.step;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double t = static_cast<double>(state.step);
  const T correction1 = static_cast<T>(1.0 - std::pow(b1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(b2, t));
  const T b1t = static_cast<T>(b1), b2t = static_cast<T>(b2);
  const T eps = static_cast<T>(state.hyper.epsilon);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* value = params[i].value->data();
    const T* grad = params[i].grad->data();
    T* m = state.first_moment[i].data();
    T* v = state.second_moment[i].data();
    const std::size_t n = params[i].value->size();
    for (std::size_t j = 0; j < n; ++j) {
      const T g = grad[j];
      m[j] = b1t * m[j] + (T{1} - b1t) * g;
      v[j] = b2t * v[j] + (T{1} - b2t) * g * g;
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      value[j] -= step * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

// Optimizer state file: "MODA", u32 version, u32 scalar width, f64 beta1,
// beta2, epsilon, u64 step, u32 tensor count, then per tensor u32 rank,
// extents, and the raw first and second moments at the scalar width.

inline constexpr std::string_view adam_magic = "MODA";

template <typename T>
std::string encode_adam_state(const AdamState<T>& state) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  ByteWriter out;
  out.bytes(adam_magic);
  out.u32(1);
  out.u32(sizeof(T));
  out.f64(state.hyper.beta1);
  out.f64(state.hyper.beta2);
  out.f64(state.hyper.epsilon);
  out.u64(state.step);
  out.u32(static_cast<std::uint32_t>(state.first_moment.size()));
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    const Tensor<T>& m = state.first_moment[i];
    out.u32(static_cast<std::uint32_t>(m.rank()));
    for (std::size_t extent : m.shape()) out.u32(static_cast<std::uint32_t>(extent));
    for (const Tensor<T>* t : {&m, &state.second_moment[i]}) {
      for (T v : t->values()) {
        if constexpr (sizeof(T) == 4) out.f32(v); else out.f64(v);
      }
    }
  }
  return out.buffer();
}

template <typename T>
AdamState<T> decode_adam_state(std::string_view bytes, const std::string& source = "adam state") {
  ByteReader in(bytes, source);
  if (in.bytes(4) != adam_magic) in.fail("bad magic, expected MODA");
  if (in.u32() != 1) in.fail("unsupported optimizer state version");
  if (in.u32() != sizeof(T)) in.fail("scalar width does not match requested precision");
  AdamState<T> state;
  state.hyper.beta1 = in.f64();
  state.hyper.beta2 = in.f64();
  state.hyper.epsilon = in.f64();
  state.step = in.u64();
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Shape shape(in.u32());
    for (auto& extent : shape) extent = in.u32();
    Tensor<T> m(shape), v(shape);
    for (Tensor<T>* t : {&m, &v}) {
      for (T& x : t->values()) {
        if constexpr (sizeof(T) == 4) x = in.f32(); else x = in.f64();
      }
    }
    state.first_moment.push_back(std::move(m));
    state.second_moment.push_back(std::move(v));
  }
  if (!in.at_end()) in.fail("trailing bytes");
  return state;
}

}  // namespace modulus

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "modulus/error.hpp"
#include "modulus/tensor.hpp"

namespace modulus {

enum class ActivationKind {
  modulus,
  soft_modulus_q,
  soft_modulus_t,
  relu,
  leaky_relu,
  tanh,
  swish,
  elu,
  mish,
  pflu,
};

inline constexpr std::array<ActivationKind, 10> all_activation_kinds = {
    ActivationKind::modulus, ActivationKind::soft_modulus_q, ActivationKind::soft_modulus_t,
    ActivationKind::relu,    ActivationKind::leaky_relu,     ActivationKind::tanh,
    ActivationKind::swish,   ActivationKind::elu,            ActivationKind::mish,
    ActivationKind::pflu,
};

/// Modulus and its two smooth approximations; everything else is a benchmark.
constexpr bool is_proposed(ActivationKind kind) {
  return kind == ActivationKind::modulus || kind == ActivationKind::soft_modulus_q ||
         kind == ActivationKind::soft_modulus_t;
}

constexpr std::string_view name_of(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::modulus: return "modulus";
    case ActivationKind::soft_modulus_q: return "softmodulusq";
    case ActivationKind::soft_modulus_t: return "softmodulust";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leakyrelu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::swish: return "swish";
    case ActivationKind::elu: return "elu";
    case ActivationKind::mish: return "mish";
    case ActivationKind::pflu: return "pflu";
  }
  return "unknown";
}

/// Display name used in rendered tables.
constexpr std::string_view display_name_of(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::modulus: return "Modulus";
    case ActivationKind::soft_modulus_q: return "SoftModulusQ";
    case ActivationKind::soft_modulus_t: return "SoftModulusT";
    case ActivationKind::relu: return "ReLU";
    case ActivationKind::leaky_relu: return "LeakyReLU";
    case ActivationKind::tanh: return "Tanh";
    case ActivationKind::swish: return "Swish";
    case ActivationKind::elu: return "ELU";
    case ActivationKind::mish: return "Mish";
    case ActivationKind::pflu: return "PFLU";
  }
  return "Unknown";
}

inline ActivationKind parse_activation_kind(std::string_view name) {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  lowered.erase(std::remove(lowered.begin(), lowered.end(), '-'), lowered.end());
  lowered.erase(std::remove(lowered.begin(), lowered.end(), '_'), lowered.end());
  for (ActivationKind kind : all_activation_kinds) {
    if (name_of(kind) == lowered) return kind;
  }
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

/// Hyperparameter carried by the kinds that use one.
constexpr bool uses_beta(ActivationKind kind) {
  return kind == ActivationKind::leaky_relu || kind == ActivationKind::elu ||
         kind == ActivationKind::swish || kind == ActivationKind::soft_modulus_t;
}

/// LeakyReLU 10, ELU 1, Swish 1, SoftModulusT 0.01.
constexpr double default_beta(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::leaky_relu: return 10.0;
    case ActivationKind::elu: return 1.0;
    case ActivationKind::swish: return 1.0;
    case ActivationKind::soft_modulus_t: return 0.01;
    default: return 0.0;
  }
}

/// Points where a kind's derivative is discontinuous or its convention is
/// imposed rather than derived.
inline std::vector<double> kink_points(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::modulus:
    case ActivationKind::relu:
    case ActivationKind::leaky_relu: return {0.0};
    case ActivationKind::soft_modulus_q: return {-1.0, 0.0, 1.0};
    default: return {};
  }
}

/// An activation kind together with its validated hyperparameter.
class Activation {
 public:
  Activation() : Activation(ActivationKind::modulus) {}
  explicit Activation(ActivationKind kind) : Activation(kind, default_beta(kind)) {}
  Activation(ActivationKind kind, double beta) : kind_(kind), beta_(beta) { validate(); }

  /// Skips the range checks on beta. Used for the LeakyReLU(beta = -1)
  /// construction that reproduces the modulus.
  static Activation unchecked(ActivationKind kind, double beta) {
    Activation a;
    a.kind_ = kind;
    a.beta_ = beta;
    return a;
  }

  ActivationKind kind() const noexcept { return kind_; }
  double beta() const noexcept { return beta_; }

  friend bool operator==(const Activation&, const Activation&) = default;

 private:
  void validate() const {
    if (!std::isfinite(beta_)) throw ParameterError("activation beta must be finite");
    switch (kind_) {
      case ActivationKind::soft_modulus_t:
        if (!(beta_ > 0.0 && beta_ <= 1.0)) {
          throw ParameterError("softmodulust beta must lie in (0, 1], got " + std::to_string(beta_));
        }
        break;
      case ActivationKind::leaky_relu:
        if (!(beta_ > 1.0)) {
          throw ParameterError("leakyrelu beta must be > 1, got " + std::to_string(beta_));
        }
        break;
      case ActivationKind::elu:
        if (!(beta_ > 0.0)) throw ParameterError("elu beta must be > 0, got " + std::to_string(beta_));
        break;
      default: break;
    }
  }

  ActivationKind kind_;
  double beta_;
};

template <typename T>
struct ValueAndDerivative {
  T value;
  T derivative;
};

/// Activation value together with its derivative at the same input. The
/// derivative is produced during the forward pass and consumed by backward.
template <typename T>
struct ActivationOut {
  Tensor<T> value;
  Tensor<T> derivative;
};

namespace detail {

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
T softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// Scalar kernels. Each returns the value and the analytic derivative.

template <typename T>
ValueAndDerivative<T> modulus_scalar(T x) {
  // sign(0) := 1, so value == derivative * x holds bit-exactly.
  const T sign = x < T{0} ? T{-1} : T{1};
  return {std::abs(x), sign};
}

template <typename T>
ValueAndDerivative<T> soft_modulus_q_scalar(T x) {
  const T ax = std::abs(x);
  if (ax <= T{1}) return {x * x * (T{2} - ax), T{4} * x - T{3} * x * ax};
  return {ax, x < T{0} ? T{-1} : T{1}};
}

template <typename T>
ValueAndDerivative<T> soft_modulus_t_scalar(T x, T beta) {
  const T r = x / beta;
  const T t = std::tanh(r);
  return {x * t, t + r * (T{1} - t * t)};
}

template <typename T>
ValueAndDerivative<T> relu_scalar(T x) {
  return x > T{0} ? ValueAndDerivative<T>{x, T{1}} : ValueAndDerivative<T>{T{0}, T{0}};
}

/// max(x / beta, x). The identity branch wins ties, so the derivative at 0 is 1.
template <typename T>
ValueAndDerivative<T> leaky_relu_scalar(T x, T beta) {
  const T scaled = x / beta;
  if (x >= scaled) return {x, T{1}};
  return {scaled, T{1} / beta};
}

template <typename T>
ValueAndDerivative<T> tanh_scalar(T x) {
  const T t = std::tanh(x);
  return {t, T{1} - t * t};
}

template <typename T>
ValueAndDerivative<T> elu_scalar(T x, T beta) {
  if (x > T{0}) return {x, T{1}};
  return {beta * std::expm1(x), beta * std::exp(x)};
}

template <typename T>
ValueAndDerivative<T> swish_scalar(T x, T beta) {
  const T s = detail::sigmoid(beta * x);
  return {x * s, s + beta * x * s * (T{1} - s)};
}

template <typename T>
ValueAndDerivative<T> mish_scalar(T x) {
  const T t = std::tanh(detail::softplus(x));
  return {x * t, t + x * (T{1} - t * t) * detail::sigmoid(x)};
}

template <typename T>
ValueAndDerivative<T> pflu_scalar(T x) {
  const T root = std::sqrt(T{1} + x * x);
  const T gate = T{0.5} * (T{1} + x / root);
  return {x * gate, gate + T{0.5} * x / (root * root * root)};
}

/// Dispatches on the kind. `beta` is ignored by kinds without a hyperparameter.
template <typename T>
ValueAndDerivative<T> evaluate(const Activation& act, T x) {
  const T beta = static_cast<T>(act.beta());
  switch (act.kind()) {
    case ActivationKind::modulus: return modulus_scalar(x);
    case ActivationKind::soft_modulus_q: return soft_modulus_q_scalar(x);
    case ActivationKind::soft_modulus_t: return soft_modulus_t_scalar(x, beta);
    case ActivationKind::relu: return relu_scalar(x);
    case ActivationKind::leaky_relu: return leaky_relu_scalar(x, beta);
    case ActivationKind::tanh: return tanh_scalar(x);
    case ActivationKind::swish: return swish_scalar(x, beta);
    case ActivationKind::elu: return elu_scalar(x, beta);
    case ActivationKind::mish: return mish_scalar(x);
    case ActivationKind::pflu: return pflu_scalar(x);
  }
  throw ParameterError("unknown activation kind");
}

namespace detail {

template <typename T, typename Fn>
ActivationOut<T> map_activation(const Tensor<T>& x, Fn&& fn) {
  check_finite(x, "activation input");
  ActivationOut<T> out{Tensor<T>(x.shape()), Tensor<T>(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const ValueAndDerivative<T> r = fn(x[i]);
    out.value[i] = r.value;
    out.derivative[i] = r.derivative;
  }
  return out;
}

}  // namespace detail

template <typename T>
ActivationOut<T> modulus(const Tensor<T>& x) {
  return detail::map_activation(x, [](T v) { return modulus_scalar(v); });
}

template <typename T>
ActivationOut<T> soft_modulus_q(const Tensor<T>& x) {
  return detail::map_activation(x, [](T v) { return soft_modulus_q_scalar(v); });
}

template <typename T>
ActivationOut<T> soft_modulus_t(const Tensor<T>& x, double beta = 0.01) {
  if (!(beta > 0.0)) throw ParameterError("softmodulust beta must be > 0, got " + std::to_string(beta));
  const T b = static_cast<T>(beta);
  return detail::map_activation(x, [b](T v) { return soft_modulus_t_scalar(v, b); });
}

/// One of the seven benchmark nonlinearities; rejects the proposed kinds.
template <typename T>
ActivationOut<T> benchmark_activation(const Activation& act, const Tensor<T>& x) {
  if (is_proposed(act.kind())) {
    throw ParameterError(std::string(name_of(act.kind())) + " is not a benchmark activation");
  }
  return detail::map_activation(x, [&act](T v) { return evaluate(act, v); });
}

template <typename T>
ActivationOut<T> apply(const Activation& act, const Tensor<T>& x) {
  return detail::map_activation(x, [&act](T v) { return evaluate(act, v); });
}

/// SoftModulusQ rebuilt from its fuzzy-set construction: three membership
/// functions blend f_low = -x, f_med = x^2 and f_high = x as a weighted mean.
inline double soft_modulus_q_fuzzy(double x) {
  const double mu_low = x < -1.0 ? 1.0 : (x < 0.0 ? -x : 0.0);
  const double mu_med = x < -1.0 ? 0.0 : (x < 0.0 ? x + 1.0 : (x < 1.0 ? 1.0 - x : 0.0));
  const double mu_high = x < 0.0 ? 0.0 : (x < 1.0 ? x : 1.0);
  const double weighted = -x * mu_low + x * x * mu_med + x * mu_high;
  return weighted / (mu_low + mu_med + mu_high);
}

}  // namespace modulus

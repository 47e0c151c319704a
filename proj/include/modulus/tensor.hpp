#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modulus/error.hpp"

namespace modulus {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major N-dimensional array.
///
/// Every extent is positive and the flat buffer always holds exactly
/// product(shape) elements. A default-constructed tensor is the only
/// exception: it has rank 0 and no storage, and serves as an "unset" value.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (data_.size() != element_count(shape_)) {
      throw DimensionError("tensor of shape " + to_string(shape_) + " needs " +
                           std::to_string(element_count(shape_)) + " values, got " +
                           std::to_string(data_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) {
      throw DimensionError("index of rank " + std::to_string(index.size()) +
                           " into tensor of shape " + to_string(shape_));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      if (i >= shape_[axis]) {
        throw DimensionError("index " + std::to_string(i) + " out of range on axis " +
                             std::to_string(axis) + " of " + to_string(shape_));
      }
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  T& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  const T& at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  /// Same buffer viewed under a new shape with the same element count.
  Tensor reshaped(Shape shape) const& { return Tensor(*this).reshaped(std::move(shape)); }
  Tensor reshaped(Shape shape) && {
    if (element_count(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.validate_shape();
    out.data_ = std::move(data_);
    shape_.clear();
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> converted(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(converted));
  }

  bool operator==(const Tensor&) const = default;

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (std::size_t extent : shape_) {
      if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Throws NumericError naming `where` and the first non-finite element.
template <typename T>
void check_finite(const Tensor<T>& t, std::string_view where) {
  const auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite value " << values[i] << " at flat index " << i << " in " << where;
      throw NumericError(os.str());
    }
  }
}

namespace detail {

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t tile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
    const std::size_t r1 = std::min(rows, r0 + tile);
    for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
      const std::size_t c1 = std::min(cols, c0 + tile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

// C[m x n] (+)= A[m x k] * B[k x n], all contiguous row-major.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  constexpr std::size_t k_block = 128;
  constexpr std::size_t n_block = 1024;
  for (std::size_t p0 = 0; p0 < k; p0 += k_block) {
    const std::size_t p1 = std::min(k, p0 + k_block);
    for (std::size_t j0 = 0; j0 < n; j0 += n_block) {
      const std::size_t j1 = std::min(n, j0 + n_block);
      std::size_t i = 0;
      // Four output rows at a time so each B row is loaded once per quad.
      for (; i + 4 <= m; i += 4) {
        T* c0 = c + i * n;
        T* c1 = c0 + n;
        T* c2 = c1 + n;
        T* c3 = c2 + n;
        const T* a0 = a + i * k;
        const T* a1 = a0 + k;
        const T* a2 = a1 + k;
        const T* a3 = a2 + k;
        for (std::size_t p = p0; p < p1; ++p) {
          const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
          const T* brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) {
            const T bv = brow[j];
            c0[j] += v0 * bv;
            c1[j] += v1 * bv;
            c2[j] += v2 * bv;
            c3[j] += v3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const T av = arow[p];
          const T* brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

// C[m x n] (+)= A^T * B with A stored [k x m].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  std::vector<T> at(m * k);
  transpose(k, m, a, at.data());
  gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

// C[m x n] (+)= A * B^T with B stored [n x k].
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  std::vector<T> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  detail::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
  check_finite(c, "matmul");
  return c;
}

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, zero padding 1 (output spatial size == input).

enum class ConvAlgorithm { im2col, direct };

namespace detail {

inline void require_conv_shapes(const Shape& in, const Shape& kernels, const Shape& bias) {
  if (in.size() != 4) throw DimensionError("conv2d input must be NxCxHxW, got " + to_string(in));
  if (kernels.size() != 4 || kernels[2] != 3 || kernels[3] != 3) {
    throw DimensionError("conv2d kernels must be Fx Cx3x3, got " + to_string(kernels));
  }
  if (kernels[1] != in[1]) {
    throw DimensionError("conv2d channel mismatch: input " + to_string(in) + " vs kernels " +
                         to_string(kernels));
  }
  if (bias.size() != 1 || bias[0] != kernels[0]) {
    throw DimensionError("conv2d bias " + to_string(bias) + " does not match kernels " +
                         to_string(kernels));
  }
}

// cols[(c*9 + ky*3 + kx) x (y*W + x)] = image[c, y+ky-1, x+kx-1] or 0 outside.
template <typename T>
void im2col3x3(const T* image, std::size_t channels, std::size_t height, std::size_t width,
               T* cols) {
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = image + c * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t y = 0; y < height; ++y) {
          T* dst = row + y * width;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst, dst + width, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sy) * width;
          // kx == 0 reads x-1, kx == 2 reads x+1.
          if (kx == 0) {
            dst[0] = T{0};
            std::copy(srow, srow + width - 1, dst + 1);
          } else if (kx == 1) {
            std::copy(srow, srow + width, dst);
          } else {
            std::copy(srow + 1, srow + width, dst);
            dst[width - 1] = T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatters-adds cols back into image.
template <typename T>
void col2im3x3(const T* cols, std::size_t channels, std::size_t height, std::size_t width,
               T* image) {
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    T* dst = image + c * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t y = 0; y < height; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
          T* drow = dst + static_cast<std::size_t>(sy) * width;
          const T* srow = row + y * width;
          if (kx == 0) {
            for (std::size_t x = 1; x < width; ++x) drow[x - 1] += srow[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < width; ++x) drow[x] += srow[x];
          } else {
            for (std::size_t x = 0; x + 1 < width; ++x) drow[x + 1] += srow[x];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias) {
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t filters = kernels.dim(0);
  Tensor<T> out({batch, filters, height, width});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          T acc = bias[f];
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
              const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
              if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
                acc += kernels[((f * channels + c) * 3 + ky) * 3 + kx] *
                       input[((n * channels + c) * height + static_cast<std::size_t>(sy)) * width +
                             static_cast<std::size_t>(sx)];
              }
            }
          }
          out[((n * filters + f) * height + y) * width + x] = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Same-padded 3x3 cross-correlation plus per-filter bias.
/// input N x C x H x W, kernels F x C x 3 x 3, bias F -> N x F x H x W.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 ConvAlgorithm algorithm = ConvAlgorithm::im2col) {
  detail::require_conv_shapes(input.shape(), kernels.shape(), bias.shape());
  Tensor<T> out;
  if (algorithm == ConvAlgorithm::direct) {
    out = detail::conv2d_direct(input, kernels, bias);
  } else {
    const std::size_t batch = input.dim(0), channels = input.dim(1);
    const std::size_t height = input.dim(2), width = input.dim(3);
    const std::size_t filters = kernels.dim(0);
    const std::size_t plane = height * width;
    const std::size_t patch = channels * 9;
    out = Tensor<T>({batch, filters, height, width});
    std::vector<T> cols(patch * plane);
    for (std::size_t n = 0; n < batch; ++n) {
      detail::im2col3x3(input.data() + n * channels * plane, channels, height, width, cols.data());
      T* dst = out.data() + n * filters * plane;
      for (std::size_t f = 0; f < filters; ++f) std::fill(dst + f * plane, dst + (f + 1) * plane, bias[f]);
      detail::gemm_nn(filters, plane, patch, kernels.data(), cols.data(), dst, true);
    }
  }
  check_finite(out, "conv2d");
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

/// Gradients of conv2d with respect to its input, kernels and bias given the
/// upstream gradient `grad_out` (N x F x H x W).
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& grad_out) {
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t filters = kernels.dim(0);
  if (grad_out.shape() != Shape{batch, filters, height, width}) {
    throw DimensionError("conv2d_backward: upstream gradient " + to_string(grad_out.shape()) +
                         " does not match output of " + to_string(input.shape()) + " * " +
                         to_string(kernels.shape()));
  }
  const std::size_t plane = height * width;
  const std::size_t patch = channels * 9;

  Conv2dGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernels.shape()), Tensor<T>({filters})};
  std::vector<T> cols(patch * plane);
  std::vector<T> grad_cols(patch * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* dy = grad_out.data() + n * filters * plane;
    detail::im2col3x3(input.data() + n * channels * plane, channels, height, width, cols.data());
    // dK[F x patch] += dY[F x plane] * cols^T
    detail::gemm_nt(filters, patch, plane, dy, cols.data(), grads.kernels.data(), true);
    // dcols[patch x plane] = K^T * dY
    detail::gemm_tn(patch, plane, filters, kernels.data(), dy, grad_cols.data(), false);
    detail::col2im3x3(grad_cols.data(), channels, height, width,
                      grads.input.data() + n * channels * plane);
    for (std::size_t f = 0; f < filters; ++f) {
      const T* row = dy + f * plane;
      grads.bias[f] += std::accumulate(row, row + plane, T{0});
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2.

template <typename T>
struct PoolResult {
  Tensor<T> output;
  /// Flat input offset of the maximum of every output cell.
  std::vector<std::size_t> argmax;
};

/// Ties resolve to the first window element in row-major order.
template <typename T>
PoolResult<T> maxpool2(const Tensor<T>& input) {
  if (input.rank() != 4) throw DimensionError("maxpool2 input must be NxCxHxW, got " + to_string(input.shape()));
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height % 2 != 0 || width % 2 != 0) {
    throw DimensionError("maxpool2 needs even spatial extents, got " + to_string(input.shape()));
  }
  const std::size_t oh = height / 2, ow = width / 2;
  PoolResult<T> result{Tensor<T>({batch, channels, oh, ow}), {}};
  result.argmax.resize(result.output.size());
  std::size_t out_index = 0;
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t top = base + (2 * y) * width + 2 * x;
        const std::size_t candidates[4] = {top, top + 1, top + width, top + width + 1};
        std::size_t best = candidates[0];
        for (std::size_t i = 1; i < 4; ++i) {
          if (input[candidates[i]] > input[best]) best = candidates[i];
        }
        result.output[out_index] = input[best];
        result.argmax[out_index] = best;
        ++out_index;
      }
    }
  }
  check_finite(result.output, "maxpool2");
  return result;
}

/// Routes each upstream gradient to the input position that won its window.
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                            const Shape& input_shape) {
  if (grad_out.size() != argmax.size()) {
    throw DimensionError("maxpool2_backward: " + std::to_string(argmax.size()) +
                         " argmax entries for gradient " + to_string(grad_out.shape()));
  }
  Tensor<T> grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

}  // namespace modulus

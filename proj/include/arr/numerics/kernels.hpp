#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

/// Boolean matrix of allowed (true) positions. A mask with `rows` rows applies
/// to a logits matrix whose row count is a multiple of `rows`: logits row r
/// uses mask row r % rows.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  Mask() = default;
  Mask(std::size_t r, std::size_t c, bool value = true) : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

  bool operator()(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { allowed[r * cols + c] = v ? 1 : 0; }

  std::size_t count_allowed() const {
    std::size_t n = 0;
    for (auto a : allowed) n += a;
    return n;
  }
};

/// Raised when every entry of a softmax row is masked out.
class DegenerateAttentionRow : public NumericError {
 public:
  explicit DegenerateAttentionRow(std::size_t row)
      : NumericError("masked_softmax: row " + std::to_string(row) + " has no unmasked entry"), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

namespace detail {

inline void check_mask(const Mask& mask, std::size_t rows, std::size_t cols) {
  if (mask.cols != cols || mask.rows == 0 || rows % mask.rows != 0) {
    throw ShapeError("mask [" + std::to_string(mask.rows) + "," + std::to_string(mask.cols) +
                     "] does not broadcast over logits with " + std::to_string(rows) + " rows of width " +
                     std::to_string(cols));
  }
}

}  // namespace detail

/// Row-wise softmax over the last dimension; masked entries are exactly zero.
template <class T>
Tensor<T> masked_softmax(const Tensor<T>& logits, const std::optional<Mask>& mask = std::nullopt) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  if (mask) detail::check_mask(*mask, rows, cols);
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.data() + r * cols;
    T* o = out.data() + r * cols;
    const std::size_t mr = mask ? r % mask->rows : 0;
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && !(*mask)(mr, c)) continue;
      any = true;
      mx = std::max(mx, in[c]);
    }
    if (!any) throw DegenerateAttentionRow(r);
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && !(*mask)(mr, c)) {
        o[c] = T{0};
        continue;
      }
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    const T inv = T{1} / sum;
    for (std::size_t c = 0; c < cols; ++c) o[c] *= inv;
  }
  return out;
}

/// Per-row normalization statistics kept for the backward pass.
template <class T>
struct LayerNormStats {
  std::vector<T> mean;
  std::vector<T> rstd;
};

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                     LayerNormStats<T>* stats = nullptr) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: gamma/beta width " + std::to_string(gamma.size()) + " vs input width " +
                     std::to_string(d));
  }
  Tensor<T> out(x.shape());
  if (stats) {
    stats->mean.assign(rows, T{0});
    stats->rstd.assign(rows, T{0});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T mean = 0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + eps);
    T* o = out.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) o[c] = (in[c] - mean) * rstd * gamma[c] + beta[c];
    if (stats) {
      stats->mean[r] = mean;
      stats->rstd[r] = rstd;
    }
  }
  return out;
}

/// tanh-approximated GELU and its derivative.
template <class T>
T gelu(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T u = k * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T{1} + std::tanh(u));
}

template <class T>
T gelu_grad(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);
  const T x2 = x * x;
  const T u = k * (x + T(0.044715) * x2 * x);
  const T th = std::tanh(u);
  const T du = k * (T{1} + T(3 * 0.044715) * x2);
  return T(0.5) * (T{1} + th) + T(0.5) * x * (T{1} - th * th) * du;
}

template <class T>
struct LossWithGrad {
  T loss{};
  Tensor<T> grad;
};

/// Sum over rows of -log softmax(logits_t)[target_t], with the gradient
/// w.r.t. the logits.
template <class T>
LossWithGrad<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
  const std::size_t rows = logits.rows();
  const std::size_t k = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                     " rows");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= k) {
      throw DataError("cross_entropy: target " + std::to_string(targets[r]) + " at row " + std::to_string(r) +
                      " outside [0, " + std::to_string(k) + ")");
    }
  }
  LossWithGrad<T> out{T{0}, masked_softmax(logits)};
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.data() + r * k;
    T mx = in[0];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, in[c]);
    T sum = 0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(in[c] - mx);
    out.loss += std::log(sum) + mx - in[targets[r]];
    out.grad.at(r, static_cast<std::size_t>(targets[r])) -= T{1};
  }
  return out;
}

/// Mean of squared elementwise differences, with the gradient w.r.t. `pred`.
template <class T>
LossWithGrad<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same_shape(target, "mse");
  LossWithGrad<T> out{T{0}, Tensor<T>(pred.shape())};
  if (pred.empty()) return out;
  const T inv_n = T{1} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    out.loss += d * d;
    out.grad[i] = T{2} * d * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

}  // namespace arr

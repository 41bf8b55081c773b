#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecvis/error.hpp"

namespace ecvis {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_to_string(const Dims& dims);

/// Dense row-major array. Rank 0 is a scalar holding one element.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{}) {}

  explicit BasicTensor(Dims dims, T fill = T{})
      : dims_(std::move(dims)), data_(dims_product(dims_), fill) {}

  BasicTensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != dims_product(dims_)) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                " does not match dims " + dims_to_string(dims_));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <class... Idx>
  T& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... Idx>
  const T& at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * dims_[axis++] + i;
    return off;
  }

  /// Same data, new dims with an equal element count.
  BasicTensor reshaped(Dims dims) const {
    if (dims_product(dims) != data_.size()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
    }
    return BasicTensor(std::move(dims), data_);
  }

  /// Contiguous sub-tensor selected by a leading index.
  BasicTensor slice(std::size_t index) const {
    if (dims_.empty() || index >= dims_[0]) {
      throw Error(ErrorCode::ShapeMismatch, "slice index out of range");
    }
    Dims rest(dims_.begin() + 1, dims_.end());
    const std::size_t n = dims_product(rest);
    return BasicTensor(std::move(rest),
                       std::vector<T>(data_.begin() + index * n, data_.begin() + (index + 1) * n));
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <class U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Mean over non-overlapping factor x factor blocks of the trailing two axes.
template <class T>
BasicTensor<T> area_downsample(const BasicTensor<T>& t, std::size_t factor) {
  if (t.rank() < 2) throw Error(ErrorCode::ShapeMismatch, "area_downsample needs rank >= 2");
  if (factor == 0) throw Error(ErrorCode::NotDivisible, "downsample factor must be >= 1");
  const std::size_t h = t.dim(t.rank() - 2);
  const std::size_t w = t.dim(t.rank() - 1);
  if (h % factor != 0 || w % factor != 0) {
    throw Error(ErrorCode::NotDivisible, "spatial dims " + std::to_string(h) + "x" +
                                             std::to_string(w) + " not divisible by " +
                                             std::to_string(factor));
  }
  if (factor == 1) return t;
  const std::size_t oh = h / factor;
  const std::size_t ow = w / factor;
  Dims out_dims = t.dims();
  out_dims[out_dims.size() - 2] = oh;
  out_dims[out_dims.size() - 1] = ow;
  BasicTensor<T> out(out_dims);
  const std::size_t planes = t.size() / (h * w);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = t.data() + p * h * w;
    T* dst = out.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          const T* row = src + (oy * factor + dy) * w + ox * factor;
          for (std::size_t dx = 0; dx < factor; ++dx) acc += static_cast<double>(row[dx]);
        }
        dst[oy * ow + ox] = static_cast<T>(acc * inv);
      }
    }
  }
  return out;
}

/// Merge the trailing H x W axes into one axis of length H*W (row-major).
template <class T>
BasicTensor<T> flatten_spatial(const BasicTensor<T>& t) {
  if (t.rank() < 2) throw Error(ErrorCode::ShapeMismatch, "flatten_spatial needs rank >= 2");
  Dims dims(t.dims().begin(), t.dims().end() - 2);
  dims.push_back(t.dim(t.rank() - 2) * t.dim(t.rank() - 1));
  return t.reshaped(std::move(dims));
}

}  // namespace ecvis

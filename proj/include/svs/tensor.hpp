#pragma once

#include <Eigen/Core>

#include <utility>

#include "svs/common.hpp"

namespace svs {

// Dense (batch, height, width, channels) extent. Convolution kernels reuse the
// same struct with the axes read as (kh, kw, cin, cout).
struct Shape {
  Index b = 0;
  Index h = 0;
  Index w = 0;
  Index c = 0;

  Index size() const { return b * h * w * c; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return strcat("(", s.b, ",", s.h, ",", s.w, ",", s.c, ")");
}

// Dense row-major B,H,W,C tensor over an Eigen array. Scalar is float for
// training and double for gradient verification.
template <class Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(Shape s) : shape_(s), data_(Array::Zero(s.size())) {
    require(s.b >= 0 && s.h >= 0 && s.w >= 0 && s.c >= 0,
            "tensor shape must be non-negative, got ", to_string(s));
  }
  Tensor(Shape s, Array data) : shape_(s), data_(std::move(data)) {
    require(data_.size() == shape_.size(), "tensor data length ", data_.size(),
            " does not match shape ", to_string(shape_));
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, Scalar v) {
    Tensor t(s);
    t.data_.setConstant(v);
    return t;
  }
  static Tensor scalar(Scalar v) {
    Tensor t(Shape{1, 1, 1, 1});
    t.data_[0] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }

  Scalar& at(Index b, Index y, Index x, Index c) {
    return data_[offset(b, y, x, c)];
  }
  Scalar at(Index b, Index y, Index x, Index c) const {
    return data_[offset(b, y, x, c)];
  }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  bool all_finite() const { return data_.allFinite(); }

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  Index offset(Index b, Index y, Index x, Index c) const {
    return ((b * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }

 private:
  Shape shape_;
  Array data_;
};

template <class Scalar>
void require_finite(const Tensor<Scalar>& t, const char* what) {
  if (!t.all_finite())
    throw numeric_error(strcat("non-finite values in ", what));
}

}  // namespace svs

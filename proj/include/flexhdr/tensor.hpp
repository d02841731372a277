#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexhdr {

// Dense extents, up to 4 dims. Canonical layouts used throughout the repo:
// images/features H x W x C, conv weights k x k x Cin x Cout, scalars rank 0.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> ds) {
    if (ds.size() > 4) throw std::invalid_argument("Shape: rank > 4");
    for (int d : ds) dims_[ndim_++] = d;
  }
  static Shape scalar() { return Shape{}; }
  static Shape hwc(int h, int w, int c) { return Shape{h, w, c}; }
  static Shape from_dims(const int* d, int n) {
    if (n > 4) throw std::invalid_argument("Shape: rank > 4");
    Shape s;
    for (int i = 0; i < n; ++i) s.dims_[s.ndim_++] = d[i];
    return s;
  }

  int ndim() const { return ndim_; }
  int operator[](int i) const { return dims_[i]; }
  int& operator[](int i) { return dims_[i]; }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < ndim_; ++i) n *= dims_[i];
    return n;
  }

  bool operator==(const Shape& o) const {
    if (ndim_ != o.ndim_) return false;
    for (int i = 0; i < ndim_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    if (ndim_ == 0) return "scalar";
    std::ostringstream os;
    for (int i = 0; i < ndim_; ++i) os << (i ? "x" : "") << dims_[i];
    return os.str();
  }

 private:
  int ndim_ = 0;
  int dims_[4] = {0, 0, 0, 0};
};

// Dense row-major array of a real scalar type (float for training, double for
// gradient verification). The last extent varies fastest, so an H x W x C
// image keeps its channels contiguous.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape_(s), data_(static_cast<size_t>(s.numel()), T(0)) {}
  Tensor(Shape s, T fill) : shape_(s), data_(static_cast<size_t>(s.numel()), fill) {}
  Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.numel())
      throw std::invalid_argument("Tensor: data size does not match shape " + shape_.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, T v) { return Tensor(s, v); }
  static Tensor scalar(T v) { return Tensor(Shape::scalar(), std::vector<T>{v}); }

  bool empty() const { return data_.empty() && shape_.ndim() == 0; }
  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // H x W x C addressing.
  T& at(int y, int x, int c) { return data_[idx(y, x, c)]; }
  const T& at(int y, int x, int c) const { return data_[idx(y, x, c)]; }

  int h() const { return shape_.ndim() >= 1 ? shape_[0] : 1; }
  int w() const { return shape_.ndim() >= 2 ? shape_[1] : 1; }
  int c() const { return shape_.ndim() >= 3 ? shape_[2] : 1; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  T sum() const {
    T s = 0;
    for (T v : data_) s += v;
    return s;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::int64_t idx(int y, int x, int c) const {
    return (static_cast<std::int64_t>(y) * shape_[1] + x) * shape_[2] + c;
  }

  Shape shape_;
  std::vector<T> data_;
};

// Uniform init in +-sqrt(1 / (k*k*Cin)) for a k x k x Cin x Cout conv weight.
template <typename T>
Tensor<T> uniform_conv_init(Shape s, std::mt19937_64& rng) {
  if (s.ndim() != 4) throw std::invalid_argument("uniform_conv_init: want k x k x Cin x Cout, got " + s.str());
  double bound = std::sqrt(1.0 / (static_cast<double>(s[0]) * s[1] * s[2]));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> uniform_tensor(Shape s, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

}  // namespace flexhdr

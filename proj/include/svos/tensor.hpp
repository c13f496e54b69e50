#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace svos {

// Dense row-major tensor. Rank is dynamic but in practice 1..4:
// matrices are (rows, cols), feature grids and images are (C, H, W).
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), T(0)) {}
  Tensor(std::vector<int> s, T fill) : shape(std::move(s)), v(count(shape), fill) {}

  static int count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return static_cast<int>(n);
  }

  int numel() const { return static_cast<int>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& operator[](int i) { return v[static_cast<size_t>(i)]; }
  const T& operator[](int i) const { return v[static_cast<size_t>(i)]; }

  // (rows, cols)
  T& at(int r, int c) { return v[static_cast<size_t>(r) * shape[1] + c]; }
  const T& at(int r, int c) const { return v[static_cast<size_t>(r) * shape[1] + c]; }

  // (C, H, W)
  T& at(int c, int y, int x) {
    return v[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at(int c, int y, int x) const {
    return v[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> o(shape);
    for (size_t i = 0; i < v.size(); ++i) o.v[i] = static_cast<U>(v[i]);
    return o;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace svos

#ifndef HBGNN_TENSOR_HPP_
#define HBGNN_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hbgnn/error.hpp"

namespace hbgnn {

/// Dense multi-dimensional array of real numbers, stored row-major.
/// The flat data length always equals the product of the extents.
template <typename S>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<S> data;
  bool requires_grad = false;

  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> extents)
      : shape(std::move(extents)), data(count(shape), S(0)) {}

  Tensor(std::vector<std::size_t> extents, std::vector<S> values)
      : shape(std::move(extents)), data(std::move(values)) {
    if (count(shape) != data.size()) {
      throw DimensionError("tensor: shape " + shape_str() + " does not match data length " +
                           std::to_string(data.size()));
    }
  }

  static Tensor scalar(S v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<std::size_t> extents, S v) {
    Tensor t(std::move(extents));
    for (auto& x : t.data) x = v;
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 0; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : 0; }

  S& at(std::size_t i) { return data[i]; }
  S at(std::size_t i) const { return data[i]; }
  S& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  S at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }

  static std::size_t count(const std::vector<std::size_t>& extents) {
    std::size_t n = 1;
    for (std::size_t e : extents) n *= e;
    return extents.empty() ? 0 : n;
  }
};

template <typename S>
bool all_finite(const Tensor<S>& t) {
  for (S v : t.data) {
    if (!std::isfinite(double(v))) return false;
  }
  return true;
}

}  // namespace hbgnn

#endif  // HBGNN_TENSOR_HPP_

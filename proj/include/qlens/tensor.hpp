#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qlens/rng.hpp"

namespace qlens {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major float32 tensor. Every element is finite; constructors
/// enforce it. A default-constructed Tensor is empty (no shape, no data).
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<const float> data() const noexcept { return data_; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Moves the payload out, leaving the tensor empty.
  std::vector<float> release() && noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

struct TensorStats {
  double mean = 0;
  double std = 0;  // population convention
  double min = 0;
  double max = 0;
  double absmax = 0;
  double l2norm = 0;
  double kurtosis = 0;  // m4 / m2^2; 0 for constant input
  std::size_t count = 0;
};

TensorStats stats(const Tensor& t);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double l2(const Tensor& a);
double l2(std::span<const float> a);

struct Normal {
  double mean = 0;
  double std = 1;
};
struct Uniform {
  double lo = -1;
  double hi = 1;
};
struct Laplace {
  double mean = 0;
  double scale = 1;
};
/// Standard normal draws with a `fraction` of randomly chosen elements
/// multiplied by `scale`.
struct OutlierMixture {
  double fraction = 0.001;
  double scale = 100;
};
using DistSpec = std::variant<Normal, Uniform, Laplace, OutlierMixture>;

void validate(const DistSpec& dist);
/// Parses "normal:MEAN,STD", "uniform:LO,HI", "laplace:MEAN,B", "outlier:P,SCALE".
DistSpec parse_dist(const std::string& text);
std::string to_string(const DistSpec& dist);

Tensor sample(const DistSpec& dist, const Shape& shape, RngStream& rng);

}  // namespace qlens

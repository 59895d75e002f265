#include "qlens/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "qlens/error.hpp"
#include "qlens/kernels.hpp"

namespace qlens {

namespace k = kernels::omp;

std::size_t numel(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), ErrorKind::kInvalidArgument, "tensor shape must have at least one axis");
  for (std::size_t e : shape)
    require(e > 0, ErrorKind::kInvalidArgument, "tensor extents must be positive, got " + to_string(shape));
}

void check_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrorKind::kShapeMismatch,
         "shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(numel(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (numel(shape_) != data_.size())
    fail(ErrorKind::kShapeMismatch, "shape " + to_string(shape_) + " holds " +
                                        std::to_string(numel(shape_)) + " elements, got " +
                                        std::to_string(data_.size()));
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      fail(ErrorKind::kNonFinite, "non-finite value at flat index " + std::to_string(i));
}

std::vector<float> Tensor::release() && noexcept {
  shape_.clear();
  return std::move(data_);
}

TensorStats stats(const Tensor& t) {
  require(!t.empty(), ErrorKind::kEmptyInput, "empty input");
  const auto x = t.data();
  const double n = static_cast<double>(x.size());
  TensorStats s;
  s.count = x.size();
  const kernels::Range r = k::range(x);
  s.min = r.min;
  s.max = r.max;
  s.absmax = r.absmax;
  s.mean = std::clamp(k::sum(x) / n, s.min, s.max);
  double m2, m4;
  k::central_moments(x, s.mean, m2, m4);
  s.std = std::sqrt(m2 / n);
  s.l2norm = std::sqrt(k::sum_sq(x));
  s.kurtosis = m2 > 0 ? (m4 / n) / ((m2 / n) * (m2 / n)) : 0.0;
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b);
  std::vector<float> out(a.size());
  k::add(a.data(), b.data(), out);
  return Tensor(a.shape(), std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b);
  std::vector<float> out(a.size());
  k::sub(a.data(), b.data(), out);
  return Tensor(a.shape(), std::move(out));
}

Tensor scale(const Tensor& a, double c) {
  std::vector<float> out(a.size(), 0.0f);
  k::axpby(c, a.data(), 0.0, out);
  return Tensor(a.shape(), std::move(out));
}

double l2(std::span<const float> a) { return std::sqrt(k::sum_sq(a)); }

double l2(const Tensor& a) { return l2(a.data()); }

void validate(const DistSpec& dist) {
  std::visit(
      [](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Normal>) {
          require(d.std > 0 && std::isfinite(d.mean), ErrorKind::kInvalidArgument,
                  "normal: std must be > 0");
        } else if constexpr (std::is_same_v<D, Uniform>) {
          require(d.lo < d.hi, ErrorKind::kInvalidArgument, "uniform: lo must be < hi");
        } else if constexpr (std::is_same_v<D, Laplace>) {
          require(d.scale > 0, ErrorKind::kInvalidArgument, "laplace: scale must be > 0");
        } else {
          require(d.fraction >= 0 && d.fraction <= 1, ErrorKind::kInvalidArgument,
                  "outlier: fraction must be in [0, 1]");
          require(d.scale >= 1, ErrorKind::kInvalidArgument, "outlier: scale must be >= 1");
        }
      },
      dist);
}

namespace {

std::pair<double, double> two_params(const std::string& name, const std::string& args) {
  const auto comma = args.find(',');
  if (comma == std::string::npos)
    fail(ErrorKind::kInvalidArgument, name + ": expected two comma-separated parameters");
  char* end = nullptr;
  const std::string a = args.substr(0, comma), b = args.substr(comma + 1);
  const double x = std::strtod(a.c_str(), &end);
  if (end == a.c_str() || *end) fail(ErrorKind::kInvalidArgument, name + ": bad number '" + a + "'");
  const double y = std::strtod(b.c_str(), &end);
  if (end == b.c_str() || *end) fail(ErrorKind::kInvalidArgument, name + ": bad number '" + b + "'");
  return {x, y};
}

}  // namespace

DistSpec parse_dist(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  DistSpec d;
  if (name == "normal") {
    d = args.empty() ? Normal{} : [&] { auto [m, s] = two_params(name, args); return Normal{m, s}; }();
  } else if (name == "uniform") {
    d = args.empty() ? Uniform{} : [&] { auto [a, b] = two_params(name, args); return Uniform{a, b}; }();
  } else if (name == "laplace") {
    d = args.empty() ? Laplace{} : [&] { auto [m, b] = two_params(name, args); return Laplace{m, b}; }();
  } else if (name == "outlier") {
    d = args.empty() ? OutlierMixture{} : [&] { auto [p, s] = two_params(name, args); return OutlierMixture{p, s}; }();
  } else {
    fail(ErrorKind::kInvalidArgument, "unknown distribution '" + name + "'");
  }
  validate(d);
  return d;
}

std::string to_string(const DistSpec& dist) {
  std::ostringstream os;
  os.precision(9);
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Normal>) os << "normal:" << d.mean << ',' << d.std;
        else if constexpr (std::is_same_v<D, Uniform>) os << "uniform:" << d.lo << ',' << d.hi;
        else if constexpr (std::is_same_v<D, Laplace>) os << "laplace:" << d.mean << ',' << d.scale;
        else os << "outlier:" << d.fraction << ',' << d.scale;
      },
      dist);
  return os.str();
}

Tensor sample(const DistSpec& dist, const Shape& shape, RngStream& rng) {
  validate(dist);
  check_shape(shape);
  const std::size_t n = numel(shape);
  std::vector<float> out(n);
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Normal>) {
          for (auto& v : out) v = static_cast<float>(d.mean + d.std * rng.normal());
        } else if constexpr (std::is_same_v<D, Uniform>) {
          for (auto& v : out) v = static_cast<float>(rng.uniform(d.lo, d.hi));
        } else if constexpr (std::is_same_v<D, Laplace>) {
          for (auto& v : out) v = static_cast<float>(rng.laplace(d.mean, d.scale));
        } else {
          for (auto& v : out) v = static_cast<float>(rng.normal());
          // partial Fisher-Yates picks round(fraction * n) distinct positions
          const auto picks = static_cast<std::size_t>(std::llround(d.fraction * static_cast<double>(n)));
          std::vector<std::size_t> idx(n);
          for (std::size_t i = 0; i < n; ++i) idx[i] = i;
          for (std::size_t i = 0; i < picks; ++i) {
            const std::size_t j = i + rng.below(n - i);
            std::swap(idx[i], idx[j]);
            out[idx[i]] = static_cast<float>(out[idx[i]] * d.scale);
          }
        }
      },
      dist);
  return Tensor(shape, std::move(out));
}

}  // namespace qlens

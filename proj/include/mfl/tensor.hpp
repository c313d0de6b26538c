#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace mfl {

using Shape = std::vector<std::size_t>;

/// Number of elements implied by a shape (1 for the empty shape).
std::size_t element_count(const Shape& shape);

/// Row-major strides for a shape.
Shape row_major_strides(const Shape& shape);

/// Dense real tensor stored row-major. The data length always equals the
/// product of the shape.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor scalar(double x);
  static DenseTensor vector(std::vector<double> data);
  static DenseTensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  bool operator==(const DenseTensor&) const = default;

 private:
  std::size_t offset(std::span<const std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

/// P ⊗ Q: shape is the concatenation, components are products.
DenseTensor tensor_product(const DenseTensor& p, const DenseTensor& q);

/// Generalised contraction of axes p and q of n through the pairing matrix g
/// (shape [n.shape[p], n.shape[q]]). Both axes are removed from the result.
DenseTensor contract(const DenseTensor& g, const DenseTensor& n, std::size_t p,
                     std::size_t q);

DenseTensor add(const DenseTensor& p, const DenseTensor& q);

/// Prepends a bias index to every axis; any entry with a 0 index is 1.
DenseTensor bias_augment(const DenseTensor& n);

/// A vector expressed in a learned basis; the output of every flattening layer.
class Yector {
 public:
  Yector() = default;
  explicit Yector(std::size_t dim) : data_(dim, 0.0) {}
  explicit Yector(std::vector<double> data) : data_(std::move(data)) {}
  Yector(std::initializer_list<double> data) : data_(data) {}

  std::size_t dim() const { return data_.size(); }
  double operator[](std::size_t k) const { return data_[k]; }
  double& operator[](std::size_t k) { return data_[k]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Yector&) const = default;

 private:
  std::vector<double> data_;
};

Yector yector_map(const std::function<double(double)>& f, const Yector& v);
double yector_dot(const Yector& v, const Yector& w);
Yector yector_add(const Yector& v, const Yector& w);

}  // namespace mfl

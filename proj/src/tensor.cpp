#include "mfl/tensor.hpp"

#include <sstream>

#include "mfl/error.hpp"

namespace mfl {

namespace {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "," : "") << shape[i];
  }
  out << ']';
  return out.str();
}

// Advances a row-major multi-index; returns false after the last one.
bool next_index(Shape& index, const Shape& shape) {
  for (std::size_t r = shape.size(); r-- > 0;) {
    if (++index[r] < shape[r]) return true;
    index[r] = 0;
  }
  return false;
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto l : shape) n *= l;
  return n;
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t r = shape.size(); r-- > 1;) {
    strides[r - 1] = strides[r] * shape[r];
  }
  return strides;
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

DenseTensor DenseTensor::scalar(double x) { return DenseTensor({}, {x}); }

DenseTensor DenseTensor::vector(std::vector<double> data) {
  Shape shape{data.size()};
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor DenseTensor::identity(std::size_t n) {
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index order " + std::to_string(index.size()) +
                     " does not match tensor order " +
                     std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= shape_[r]) throw ShapeError("tensor index out of range");
    off = off * shape_[r] + index[r];
  }
  return off;
}

double& DenseTensor::at(std::span<const std::size_t> index) {
  return data_[offset(index)];
}
double DenseTensor::at(std::span<const std::size_t> index) const {
  return data_[offset(index)];
}
double& DenseTensor::at(std::initializer_list<std::size_t> index) {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}
double DenseTensor::at(std::initializer_list<std::size_t> index) const {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}

DenseTensor tensor_product(const DenseTensor& p, const DenseTensor& q) {
  Shape shape = p.shape();
  shape.insert(shape.end(), q.shape().begin(), q.shape().end());
  std::vector<double> data;
  data.reserve(p.size() * q.size());
  for (double a : p.data()) {
    for (double b : q.data()) data.push_back(a * b);
  }
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor contract(const DenseTensor& g, const DenseTensor& n, std::size_t p,
                     std::size_t q) {
  const Shape& ns = n.shape();
  if (p == q || p >= ns.size() || q >= ns.size()) {
    throw ShapeError("contraction axes must be two distinct axes of the tensor");
  }
  if (g.order() != 2 || g.shape()[0] != ns[p] || g.shape()[1] != ns[q]) {
    throw ShapeError("pairing map shape " + shape_string(g.shape()) +
                     " does not match axes of " + shape_string(ns));
  }
  Shape out_shape;
  for (std::size_t r = 0; r < ns.size(); ++r) {
    if (r != p && r != q) out_shape.push_back(ns[r]);
  }
  DenseTensor out(out_shape);
  if (n.size() == 0) return out;

  const Shape out_strides = row_major_strides(out_shape);
  Shape index(ns.size(), 0);
  std::size_t flat = 0;
  do {
    std::size_t o = 0;
    for (std::size_t r = 0, k = 0; r < ns.size(); ++r) {
      if (r == p || r == q) continue;
      o += index[r] * out_strides[k++];
    }
    out.data()[o] += g.data()[index[p] * ns[q] + index[q]] * n.data()[flat];
    ++flat;
  } while (next_index(index, ns));
  return out;
}

DenseTensor add(const DenseTensor& p, const DenseTensor& q) {
  if (p.shape() != q.shape()) {
    throw ShapeError("cannot add tensors of shapes " + shape_string(p.shape()) +
                     " and " + shape_string(q.shape()));
  }
  std::vector<double> data(p.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = p.data()[i] + q.data()[i];
  }
  return DenseTensor(p.shape(), std::move(data));
}

DenseTensor bias_augment(const DenseTensor& n) {
  Shape shape = n.shape();
  for (auto& l : shape) ++l;
  DenseTensor out(shape);
  Shape index(shape.size(), 0);
  std::size_t flat = 0;
  const Shape inner_strides = row_major_strides(n.shape());
  do {
    bool on_bias = false;
    std::size_t inner = 0;
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] == 0) {
        on_bias = true;
        break;
      }
      inner += (index[r] - 1) * inner_strides[r];
    }
    out.data()[flat++] = on_bias ? 1.0 : n.data()[inner];
  } while (next_index(index, shape));
  return out;
}

Yector yector_map(const std::function<double(double)>& f, const Yector& v) {
  std::vector<double> out(v.dim());
  for (std::size_t k = 0; k < v.dim(); ++k) out[k] = f(v[k]);
  return Yector(std::move(out));
}

double yector_dot(const Yector& v, const Yector& w) {
  if (v.dim() != w.dim()) {
    throw ShapeError("dot product of yectors with dims " +
                     std::to_string(v.dim()) + " and " +
                     std::to_string(w.dim()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < v.dim(); ++k) s += v[k] * w[k];
  return s;
}

Yector yector_add(const Yector& v, const Yector& w) {
  if (v.dim() != w.dim()) {
    throw ShapeError("sum of yectors with dims " + std::to_string(v.dim()) +
                     " and " + std::to_string(w.dim()));
  }
  std::vector<double> out(v.dim());
  for (std::size_t k = 0; k < v.dim(); ++k) out[k] = v[k] + w[k];
  return Yector(std::move(out));
}

}  // namespace mfl

#include "mfl/forms.hpp"

#include <map>

#include "mfl/error.hpp"

namespace mfl {

namespace {

bool next_index(std::vector<std::size_t>& idx, const Shape& shape) {
  for (std::size_t a = idx.size(); a-- > 0;) {
    if (++idx[a] < shape[a]) return true;
    idx[a] = 0;
  }
  return false;
}

double sum_range(std::span<const double> v, std::size_t from) {
  double s = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) s += v[i];
  return s;
}

}  // namespace

std::vector<double> augment_vector(std::span<const double> v) {
  std::vector<double> out{1.0};
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

DenseTensor augment_affine(const DenseTensor& l, const DenseTensor& b) {
  const std::size_t out = l.shape()[0];
  const std::size_t in = l.shape()[1];
  if (b.shape() != Shape{out}) throw ShapeError("bias length does not match the matrix");
  DenseTensor a({out, in + 1});
  for (std::size_t k = 0; k < out; ++k) {
    a.at({k, 0}) = b.at({k});
    for (std::size_t j = 0; j < in; ++j) a.at({k, j + 1}) = l.at({k, j});
  }
  return a;
}

std::pair<DenseTensor, DenseTensor> collapse_affine(const DenseTensor& l_aug) {
  const std::size_t out = l_aug.shape()[0];
  const std::size_t in = l_aug.shape()[1] - 1;
  DenseTensor l({out, in});
  DenseTensor b({out});
  for (std::size_t k = 0; k < out; ++k) {
    b.at({k}) = l_aug.at({k, 0});
    for (std::size_t j = 0; j < in; ++j) l.at({k, j}) = l_aug.at({k, j + 1});
  }
  return {l, b};
}

Yector linear_forward(const DenseTensor& l_aug, std::span<const double> v) {
  const std::size_t out = l_aug.shape()[0];
  const std::size_t cols = l_aug.shape()[1];
  if (v.size() + 1 != cols) throw ShapeError("input does not match the augmented matrix");
  auto va = augment_vector(v);
  Yector y(out);
  for (std::size_t k = 0; k < out; ++k) {
    for (std::size_t j = 0; j < cols; ++j) y[k] += l_aug.at({k, j}) * va[j];
  }
  return y;
}

Yector linear_pool_forward(const DenseTensor& l_aug, std::span<const Yector> vs) {
  Yector y(l_aug.shape()[0]);
  for (const auto& v : vs) y = yector_add(y, linear_forward(l_aug, v.data()));
  return y;
}

Yector augmented_tensor_forward(const AugmentedTensorForm& form, const DenseTensor& n) {
  const std::size_t order = n.order();
  if (form.l.size() != order) throw ShapeError("one matrix per axis expected");
  if (order >= 2 && form.w.size() != order) throw ShapeError("one weight vector per axis expected");
  const DenseTensor na = bias_augment(n);
  const std::size_t out = form.l[0].shape()[0];
  Yector y(out);
  if (na.size() == 0) return y;
  std::vector<std::size_t> idx(order, 0);
  do {
    const double x = na.at(idx);
    for (std::size_t k = 0; k < out; ++k) {
      double coef = 0.0;
      for (std::size_t r = 0; r < order; ++r) {
        double term = form.l[r].at({k, idx[r]});
        for (std::size_t s = 0; s < order; ++s) {
          if (s != r) term *= form.w[s].at({idx[s]});
        }
        coef += term;
      }
      y[k] += coef * x;
    }
  } while (next_index(idx, na.shape()));
  return y;
}

std::vector<DenseTensor> collapse_tensor_form(const AugmentedTensorForm& form) {
  const std::size_t order = form.l.size();
  const std::size_t out = form.l.at(0).shape()[0];
  std::vector<DenseTensor> slots;
  slots.emplace_back(Shape{out});
  for (std::size_t r = 0; r < order; ++r) {
    auto [l, _] = collapse_affine(form.l[r]);
    slots.push_back(l);
  }
  if (order >= 2) {
    for (std::size_t r = 0; r < order; ++r) {
      auto w = form.w[r].data();
      slots.push_back(DenseTensor::vector(std::vector<double>(w.begin() + 1, w.end())));
    }
  }
  // Sum of all coefficients, and of those touching no bias index; both factor
  // into per-axis sums.
  std::vector<double> w_all(order, 1.0), w_int(order, 1.0);
  if (order >= 2) {
    for (std::size_t r = 0; r < order; ++r) {
      w_all[r] = sum_range(form.w[r].data(), 0);
      w_int[r] = sum_range(form.w[r].data(), 1);
    }
  }
  for (std::size_t k = 0; k < out; ++k) {
    double total = 0.0, interior = 0.0;
    for (std::size_t r = 0; r < order; ++r) {
      const std::size_t cols = form.l[r].shape()[1];
      auto row = form.l[r].data().subspan(k * cols, cols);
      double t = sum_range(row, 0), i = sum_range(row, 1);
      for (std::size_t s = 0; s < order; ++s) {
        if (s == r) continue;
        t *= w_all[s];
        i *= w_int[s];
      }
      total += t;
      interior += i;
    }
    slots[0].at({k}) = total - interior;
  }
  return slots;
}

namespace {

std::map<std::vector<std::size_t>, std::size_t> subset_slots(const Node& node) {
  std::map<std::vector<std::size_t>, std::size_t> out;
  for (std::size_t s = 0; s < node.subsets.size(); ++s) out[node.subsets[s]] = 1 + s;
  return out;
}

Shape product_tensor_shape(const Node& node) {
  Shape shape{node.out_dim};
  for (std::size_t d : node.shape) shape.push_back(d + 1);
  return shape;
}

}  // namespace

DenseTensor assemble_product_tensor(const Node& node, std::span<const DenseTensor> slots) {
  if (node.kind != NodeKind::ProductInteraction) throw ShapeError("not a product node");
  const auto table = subset_slots(node);
  const Shape shape = product_tensor_shape(node);
  DenseTensor m(shape);
  if (m.size() == 0) return m;
  std::vector<std::size_t> idx(shape.size(), 0);
  do {
    std::vector<std::size_t> subset, inner{idx[0]};
    for (std::size_t r = 0; r < node.shape.size(); ++r) {
      if (idx[1 + r] > 0) {
        subset.push_back(r);
        inner.push_back(idx[1 + r] - 1);
      }
    }
    if (subset.empty()) {
      m.at(idx) = slots[0].at({idx[0]});
    } else if (auto it = table.find(subset); it != table.end()) {
      m.at(idx) = slots[it->second].at(inner);
    }
  } while (next_index(idx, shape));
  return m;
}

std::vector<DenseTensor> collapse_product_tensor(const Node& node, const DenseTensor& m) {
  if (m.shape() != product_tensor_shape(node)) throw ShapeError("M has the wrong shape");
  const auto table = subset_slots(node);
  std::vector<DenseTensor> slots;
  for (const auto& decl : node.slots) slots.emplace_back(decl.shape);
  if (m.size() == 0) return slots;
  std::vector<std::size_t> idx(m.order(), 0);
  do {
    std::vector<std::size_t> subset, inner{idx[0]};
    for (std::size_t r = 0; r < node.shape.size(); ++r) {
      if (idx[1 + r] > 0) {
        subset.push_back(r);
        inner.push_back(idx[1 + r] - 1);
      }
    }
    if (subset.empty()) {
      slots[0].at({idx[0]}) = m.at(idx);
    } else if (auto it = table.find(subset); it != table.end()) {
      slots[it->second].at(inner) = m.at(idx);
    }
  } while (next_index(idx, m.shape()));
  return slots;
}

Yector multilinear_forward(const DenseTensor& m, std::span<const Yector> vs) {
  if (m.order() != vs.size() + 1) throw ShapeError("one input per field expected");
  std::vector<std::vector<double>> va;
  for (std::size_t r = 0; r < vs.size(); ++r) {
    if (vs[r].dim() + 1 != m.shape()[1 + r]) throw ShapeError("field dimension mismatch");
    va.push_back(augment_vector(vs[r].data()));
  }
  Yector y(m.shape()[0]);
  if (m.size() == 0) return y;
  std::vector<std::size_t> idx(m.order(), 0);
  do {
    double p = m.at(idx);
    for (std::size_t r = 0; r < vs.size(); ++r) p *= va[r][idx[1 + r]];
    y[idx[0]] += p;
  } while (next_index(idx, m.shape()));
  return y;
}

}  // namespace mfl

#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mfl/tensor.hpp"

namespace mfl {

class TypeExpr;
class SchemaEnv;

/// A runtime datum: a dense tensor, a tagged variant (1-based tag), a tuple,
/// or a bag whose carrier order carries no meaning.
class Value {
 public:
  enum class Kind { Tensor, Tagged, Tuple, Bag };

  Value() : Value(unit()) {}

  static Value tensor(Shape shape, std::vector<double> data);
  static Value tensor(const DenseTensor& t);
  static Value scalar(double x);
  static Value vector(std::vector<double> data);
  /// The empty vector; sole inhabitant of Unit.
  static Value unit();
  static Value tagged(std::size_t tag, Value payload);
  static Value tuple(std::vector<Value> items);
  static Value bag(std::vector<Value> items);

  Kind kind() const { return kind_; }
  bool is_tensor() const { return kind_ == Kind::Tensor; }

  const Shape& shape() const { return shape_; }
  std::span<const double> data() const { return data_; }
  DenseTensor as_tensor() const;

  std::size_t tag() const { return tag_; }
  const Value& payload() const;
  const std::vector<Value>& items() const { return items_; }

  /// Structural equality; bags compare as multisets, reals compare exactly.
  bool operator==(const Value& o) const { return compare(*this, o) == 0; }
  /// Total order consistent with operator==, used for multiplicity census.
  static int compare(const Value& a, const Value& b);

  std::string to_string() const;

 private:
  explicit Value(Kind kind) : kind_(kind) {}

  Kind kind_;
  Shape shape_;
  std::vector<double> data_;
  std::size_t tag_ = 0;
  std::vector<Value> items_;  // tuple/bag items; the payload of a Tagged
};

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const {
    return Value::compare(a, b) < 0;
  }
};

using ValueFn = std::function<Value(const Value&)>;

// Sum.
Value analyze(std::span<const ValueFn> branches, const Value& s);
// Product.
Value project(std::size_t i, const Value& p);
// Multiset primitives.
Value mset_fold(const Value& init,
                const std::function<Value(const Value&, const Value&)>& f,
                const Value& s);
/// Additive union: multiplicities add.
Value mset_union(const Value& a, const Value& b);

// Derived multiset operations, all expressed through fold and union.
Value mset_sum(const Value& a, const Value& b);
Value mset_intersection(const Value& a, const Value& b);
Value mset_difference(const Value& a, const Value& b);
Value mset_flatten(const Value& s);
Value mset_reduce(const Value& s, const Value& identity,
                  const std::function<Value(const Value&, const Value&)>& op);
std::size_t mset_size(const Value& s);
std::size_t mset_multiplicity(const Value& s, const Value& x);
Value mset_cartesian(const Value& a, const Value& b);
Value mset_map(const ValueFn& f, const Value& s);

/// Structure-preserving map over the immediate type arguments of a composite
/// value. Tensors take no functions; Sum/Prod take one per alternative/field
/// (the sum arity is supplied because a tagged value does not carry it);
/// multisets take exactly one.
Value poly_map(std::span<const ValueFn> fs, const Value& v,
               std::size_t sum_arity = 0);

/// Builds the List value x_1 :: x_2 :: ... :: Nil (head first).
Value make_list(std::span<const Value> elements);
/// Elements of a List value, head first.
std::vector<Value> list_elements(const Value& list);

/// Draws a random value conforming to t. Bags draw up to max_bag elements;
/// recursive types are cut off by taking the first non-recursive alternative
/// once max_depth is exhausted.
Value random_value(const TypeExpr& t, const SchemaEnv& env, std::mt19937_64& rng,
                   std::size_t max_bag = 4, std::size_t max_depth = 4);

}  // namespace mfl

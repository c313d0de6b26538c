#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mfl/tensor.hpp"

namespace mfl {

class Value;

/// An algebraic data type: a tensor base case, or a sum, product, or multiset
/// built from other types, or a reference to a named definition.
class TypeExpr {
 public:
  enum class Kind { Tensor, Sum, Prod, MSet, Ref };

  TypeExpr() : TypeExpr(Kind::Tensor, {0}, {}, {}) {}

  static TypeExpr tensor(Shape shape);
  static TypeExpr sum(std::vector<TypeExpr> args);
  static TypeExpr prod(std::vector<TypeExpr> args);
  static TypeExpr mset(TypeExpr element);
  static TypeExpr ref(std::string name);

  // Sugar.
  static TypeExpr unit() { return tensor({0}); }
  static TypeExpr scal() { return tensor({1}); }
  static TypeExpr vec(std::size_t l) { return tensor({l}); }
  static TypeExpr enumeration(std::size_t l);
  static TypeExpr boolean() { return enumeration(2); }
  static TypeExpr option(TypeExpr t);

  Kind kind() const { return kind_; }
  const Shape& shape() const { return shape_; }
  const std::vector<TypeExpr>& args() const { return args_; }
  const std::string& name() const { return name_; }

  bool is_tensor() const { return kind_ == Kind::Tensor; }
  bool is_unit() const { return kind_ == Kind::Tensor && shape_ == Shape{0}; }
  /// One-axis tensor (Unit, Scal, and Vector[l] included).
  bool is_vector() const { return kind_ == Kind::Tensor && shape_.size() == 1; }

  bool operator==(const TypeExpr&) const = default;
  bool operator<(const TypeExpr& o) const { return to_string() < o.to_string(); }

  /// Canonical text; re-parses to an equal TypeExpr.
  std::string to_string() const;

 private:
  TypeExpr(Kind kind, Shape shape, std::vector<TypeExpr> args, std::string name)
      : kind_(kind),
        shape_(std::move(shape)),
        args_(std::move(args)),
        name_(std::move(name)) {}

  Kind kind_;
  Shape shape_;
  std::vector<TypeExpr> args_;
  std::string name_;
};

/// Monomorphic definitions produced by parsing a schema. Parametric user
/// definitions and List[T] are instantiated per use; each instance is its own
/// definition named by its printed head, e.g. "List[Tensor[1]]".
class SchemaEnv {
 public:
  SchemaEnv() = default;

  bool contains(const std::string& name) const;
  const TypeExpr& definition(const std::string& name) const;
  const std::map<std::string, TypeExpr>& definitions() const { return defs_; }

  /// Names written by the user (not generated instances), in source order.
  const std::vector<std::string>& user_names() const { return user_names_; }
  bool is_user_name(const std::string& name) const;

  /// True when the named definition can reach itself through references.
  bool is_recursive(const std::string& name) const;

  /// Follows references until a structural node is reached.
  const TypeExpr& resolve(const TypeExpr& t) const;

  /// Inlines every non-recursive reference; recursive ones stay as Ref.
  TypeExpr expand(const TypeExpr& t) const;

  /// True when a finite value of t exists.
  bool inhabited(const TypeExpr& t) const;

  /// Verifies that every Ref in t resolves.
  void check_resolved(const TypeExpr& t) const;

  // Builder API used by the parser and by tests.
  void define(const std::string& name, TypeExpr body, bool user_written);
  /// Recomputes the recursive set and enforces the recursion guard.
  void finalize();

 private:
  std::map<std::string, TypeExpr> defs_;
  std::vector<std::string> user_names_;
  std::set<std::string> user_set_;
  std::set<std::string> recursive_;
  std::map<std::string, bool> inhabited_;
};

/// Parses schema source (one definition per line, '#' comments).
SchemaEnv parse_schema(std::string_view text);

/// Parses a single type expression against an existing environment, adding
/// any generated instances (List[T], parametric definitions) to it.
TypeExpr parse_type(std::string_view text, SchemaEnv& env);

/// Structural subtyping: covariance in every constructor, sum widening by
/// appending alternatives, product narrowing by dropping trailing fields.
bool is_subtype(const TypeExpr& a, const TypeExpr& b, const SchemaEnv& env);

/// One isomorphic rewrite of a type together with its value converters.
struct IsomorphicView {
  enum class Rule { ScalarCollapse, UnitCollapse, SingletonSum, SingletonProd };
  Rule rule;
  TypeExpr type;
};

/// Root-level isomorphic rewrites: scalar collapse, unit collapse, singleton
/// Sum/Prod unwrap. Axis and argument reordering are never produced.
std::vector<IsomorphicView> isomorphic_views(const TypeExpr& t,
                                             const SchemaEnv& env);

Value to_view(const IsomorphicView& view, const Value& v);
Value from_view(const IsomorphicView& view, const TypeExpr& original,
                const Value& v);

/// Empty when v conforms to t; otherwise a diagnostic naming the path of the
/// first mismatch ("root", "root.2", "root|1", "root{3}").
std::optional<std::string> check_value(const TypeExpr& t, const Value& v,
                                       const SchemaEnv& env);

}  // namespace mfl

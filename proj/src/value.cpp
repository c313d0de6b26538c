#include "mfl/value.hpp"

#include <algorithm>
#include <sstream>

#include "mfl/error.hpp"
#include "mfl/types.hpp"

namespace mfl {

Value Value::tensor(Shape shape, std::vector<double> data) {
  if (data.size() != element_count(shape)) {
    throw ValueError("tensor value data length does not match its shape");
  }
  Value v(Kind::Tensor);
  v.shape_ = std::move(shape);
  v.data_ = std::move(data);
  return v;
}

Value Value::tensor(const DenseTensor& t) { return tensor(t.shape(), t.values()); }

Value Value::scalar(double x) { return tensor({1}, {x}); }

Value Value::vector(std::vector<double> data) {
  Shape shape{data.size()};
  return tensor(std::move(shape), std::move(data));
}

Value Value::unit() { return tensor({0}, {}); }

Value Value::tagged(std::size_t tag, Value payload) {
  if (tag < 1) throw ValueError("sum tags are 1-based");
  Value v(Kind::Tagged);
  v.tag_ = tag;
  v.items_.push_back(std::move(payload));
  return v;
}

Value Value::tuple(std::vector<Value> items) {
  Value v(Kind::Tuple);
  v.items_ = std::move(items);
  return v;
}

Value Value::bag(std::vector<Value> items) {
  Value v(Kind::Bag);
  v.items_ = std::move(items);
  return v;
}

DenseTensor Value::as_tensor() const {
  if (kind_ != Kind::Tensor) throw ValueError("value is not a tensor");
  return DenseTensor(shape_, data_);
}

const Value& Value::payload() const {
  if (kind_ != Kind::Tagged) throw ValueError("value is not a tagged variant");
  return items_.front();
}

namespace {

int compare_items(const std::vector<Value>& a, const std::vector<Value>& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (int c = Value::compare(a[i], b[i]); c != 0) return c;
  }
  return 0;
}

std::vector<Value> sorted(std::vector<Value> items) {
  std::sort(items.begin(), items.end(), ValueLess{});
  return items;
}

}  // namespace

int Value::compare(const Value& a, const Value& b) {
  if (a.kind_ != b.kind_) return a.kind_ < b.kind_ ? -1 : 1;
  switch (a.kind_) {
    case Kind::Tensor:
      if (a.shape_ != b.shape_) return a.shape_ < b.shape_ ? -1 : 1;
      for (std::size_t i = 0; i < a.data_.size(); ++i) {
        if (a.data_[i] < b.data_[i]) return -1;
        if (b.data_[i] < a.data_[i]) return 1;
      }
      return 0;
    case Kind::Tagged:
      if (a.tag_ != b.tag_) return a.tag_ < b.tag_ ? -1 : 1;
      return compare(a.items_.front(), b.items_.front());
    case Kind::Tuple:
      return compare_items(a.items_, b.items_);
    case Kind::Bag:
      if (a.items_.size() != b.items_.size()) {
        return a.items_.size() < b.items_.size() ? -1 : 1;
      }
      return compare_items(sorted(a.items_), sorted(b.items_));
  }
  return 0;
}

std::string Value::to_string() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind_) {
    case Kind::Tensor:
      if (shape_ == Shape{0}) return "unit";
      if (shape_ == Shape{1}) {
        out << data_[0];
        return out.str();
      }
      out << "T[";
      for (std::size_t i = 0; i < shape_.size(); ++i) out << (i ? "," : "") << shape_[i];
      out << "](";
      for (std::size_t i = 0; i < data_.size(); ++i) out << (i ? "," : "") << data_[i];
      out << ')';
      break;
    case Kind::Tagged:
      out << '#' << tag_ << ' ' << items_.front().to_string();
      break;
    case Kind::Tuple:
    case Kind::Bag:
      out << (kind_ == Kind::Tuple ? '(' : '{');
      for (std::size_t i = 0; i < items_.size(); ++i) {
        out << (i ? ", " : "") << items_[i].to_string();
      }
      out << (kind_ == Kind::Tuple ? ')' : '}');
      break;
  }
  return out.str();
}

Value analyze(std::span<const ValueFn> branches, const Value& s) {
  if (s.kind() != Value::Kind::Tagged) throw ValueError("analyze needs a tagged value");
  if (s.tag() > branches.size()) {
    throw ValueError("tag " + std::to_string(s.tag()) + " out of range for " +
                     std::to_string(branches.size()) + " branches");
  }
  return branches[s.tag() - 1](s.payload());
}

Value project(std::size_t i, const Value& p) {
  if (p.kind() != Value::Kind::Tuple) throw ValueError("project needs a tuple");
  if (i < 1 || i > p.items().size()) {
    throw ValueError("projection index " + std::to_string(i) +
                     " out of range for arity " + std::to_string(p.items().size()));
  }
  return p.items()[i - 1];
}

namespace {

const Value& require_bag(const Value& s) {
  if (s.kind() != Value::Kind::Bag) throw ValueError("expected a multiset value");
  return s;
}

Value singleton(const Value& x) { return Value::bag({x}); }

}  // namespace

Value mset_fold(const Value& init,
                const std::function<Value(const Value&, const Value&)>& f,
                const Value& s) {
  Value acc = init;
  for (const Value& x : require_bag(s).items()) acc = f(acc, x);
  return acc;
}

Value mset_union(const Value& a, const Value& b) {
  std::vector<Value> items = require_bag(a).items();
  const auto& more = require_bag(b).items();
  items.insert(items.end(), more.begin(), more.end());
  return Value::bag(std::move(items));
}

Value mset_sum(const Value& a, const Value& b) { return mset_union(a, b); }

std::size_t mset_multiplicity(const Value& s, const Value& x) {
  Value count = mset_fold(
      Value::scalar(0.0),
      [&](const Value& acc, const Value& y) {
        return Value::scalar(acc.data()[0] + (y == x ? 1.0 : 0.0));
      },
      s);
  return static_cast<std::size_t>(count.data()[0]);
}

Value mset_intersection(const Value& a, const Value& b) {
  return mset_fold(
      Value::bag({}),
      [&](const Value& acc, const Value& x) {
        std::size_t keep = std::min(mset_multiplicity(a, x), mset_multiplicity(b, x));
        return mset_multiplicity(acc, x) < keep ? mset_union(acc, singleton(x)) : acc;
      },
      a);
}

Value mset_difference(const Value& a, const Value& b) {
  return mset_fold(
      Value::bag({}),
      [&](const Value& acc, const Value& x) {
        std::size_t ma = mset_multiplicity(a, x);
        std::size_t mb = mset_multiplicity(b, x);
        std::size_t keep = ma > mb ? ma - mb : 0;
        return mset_multiplicity(acc, x) < keep ? mset_union(acc, singleton(x)) : acc;
      },
      a);
}

Value mset_map(const ValueFn& f, const Value& s) {
  return mset_fold(
      Value::bag({}),
      [&](const Value& acc, const Value& x) { return mset_union(acc, singleton(f(x))); },
      s);
}

Value mset_flatten(const Value& s) {
  return mset_fold(
      Value::bag({}), [](const Value& c, const Value& x) { return mset_union(c, x); }, s);
}

Value mset_reduce(const Value& s, const Value& identity,
                  const std::function<Value(const Value&, const Value&)>& op) {
  return mset_fold(identity, op, s);
}

std::size_t mset_size(const Value& s) {
  Value ones = mset_map([](const Value&) { return Value::scalar(1.0); }, s);
  Value total = mset_reduce(ones, Value::scalar(0.0), [](const Value& c, const Value& x) {
    return Value::scalar(c.data()[0] + x.data()[0]);
  });
  return static_cast<std::size_t>(total.data()[0]);
}

Value mset_cartesian(const Value& a, const Value& b) {
  return mset_flatten(mset_map(
      [&](const Value& x1) {
        return mset_map([&](const Value& x2) { return Value::tuple({x1, x2}); }, b);
      },
      a));
}

Value poly_map(std::span<const ValueFn> fs, const Value& v, std::size_t sum_arity) {
  switch (v.kind()) {
    case Value::Kind::Tensor:
      if (!fs.empty()) throw ValueError("poly map over a tensor takes no functions");
      return v;
    case Value::Kind::Tagged: {
      const std::size_t n = sum_arity ? sum_arity : fs.size();
      if (fs.size() != n) throw ValueError("poly map arity does not match the sum");
      std::vector<ValueFn> branches;
      for (std::size_t i = 0; i < n; ++i) {
        branches.push_back([&, i](const Value& x) { return Value::tagged(i + 1, fs[i](x)); });
      }
      return analyze(branches, v);
    }
    case Value::Kind::Tuple: {
      const std::size_t n = v.items().size();
      if (fs.size() != n) throw ValueError("poly map arity does not match the tuple");
      std::vector<Value> items;
      for (std::size_t i = 1; i <= n; ++i) items.push_back(fs[i - 1](project(i, v)));
      return Value::tuple(std::move(items));
    }
    case Value::Kind::Bag:
      if (fs.size() != 1) throw ValueError("poly map over a multiset takes one function");
      return mset_map(fs[0], v);
  }
  return v;
}

Value make_list(std::span<const Value> elements) {
  Value list = Value::tagged(1, Value::unit());
  for (std::size_t i = elements.size(); i-- > 0;) {
    list = Value::tagged(2, Value::tuple({elements[i], list}));
  }
  return list;
}

std::vector<Value> list_elements(const Value& list) {
  std::vector<Value> out;
  const Value* cur = &list;
  while (cur->kind() == Value::Kind::Tagged && cur->tag() == 2) {
    const Value& cell = cur->payload();
    if (cell.kind() != Value::Kind::Tuple || cell.items().size() != 2) {
      throw ValueError("malformed list cell");
    }
    out.push_back(cell.items()[0]);
    cur = &cell.items()[1];
  }
  return out;
}

namespace {

bool reaches_recursion(const TypeExpr& t, const SchemaEnv& env) {
  switch (t.kind()) {
    case TypeExpr::Kind::Ref:
      return env.is_recursive(t.name()) ||
             reaches_recursion(env.definition(t.name()), env);
    case TypeExpr::Kind::Tensor:
      return false;
    default:
      for (const auto& a : t.args()) {
        if (reaches_recursion(a, env)) return true;
      }
      return false;
  }
}

Value random_value_impl(const TypeExpr& t, const SchemaEnv& env, std::mt19937_64& rng,
                        std::size_t max_bag, std::size_t depth) {
  const TypeExpr& r = env.resolve(t);
  std::uniform_real_distribution<double> real(-1.0, 1.0);
  switch (r.kind()) {
    case TypeExpr::Kind::Tensor: {
      std::vector<double> data(element_count(r.shape()));
      for (auto& x : data) x = real(rng);
      return Value::tensor(r.shape(), std::move(data));
    }
    case TypeExpr::Kind::Sum: {
      std::vector<std::size_t> choices;
      for (std::size_t i = 0; i < r.args().size(); ++i) {
        if (!env.inhabited(r.args()[i])) continue;
        if (depth == 0 && reaches_recursion(r.args()[i], env)) continue;
        choices.push_back(i);
      }
      if (choices.empty()) {
        for (std::size_t i = 0; i < r.args().size(); ++i) {
          if (env.inhabited(r.args()[i])) choices.push_back(i);
        }
      }
      if (choices.empty()) throw ValueError("cannot sample an uninhabited type");
      std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
      std::size_t i = choices[pick(rng)];
      std::size_t next = reaches_recursion(r.args()[i], env) && depth > 0 ? depth - 1 : depth;
      return Value::tagged(i + 1, random_value_impl(r.args()[i], env, rng, max_bag, next));
    }
    case TypeExpr::Kind::Prod: {
      std::vector<Value> items;
      for (const auto& a : r.args()) {
        items.push_back(random_value_impl(a, env, rng, max_bag, depth));
      }
      return Value::tuple(std::move(items));
    }
    case TypeExpr::Kind::MSet: {
      const bool recursive = reaches_recursion(r.args()[0], env);
      std::size_t limit = (recursive && depth == 0) ? 0 : max_bag;
      std::uniform_int_distribution<std::size_t> count(0, limit);
      std::size_t n = count(rng);
      std::vector<Value> items;
      std::size_t next = recursive && depth > 0 ? depth - 1 : depth;
      for (std::size_t i = 0; i < n; ++i) {
        items.push_back(random_value_impl(r.args()[0], env, rng, max_bag, next));
      }
      return Value::bag(std::move(items));
    }
    case TypeExpr::Kind::Ref:
      break;
  }
  throw ValueError("unresolved type while sampling");
}

}  // namespace

Value random_value(const TypeExpr& t, const SchemaEnv& env, std::mt19937_64& rng,
                   std::size_t max_bag, std::size_t max_depth) {
  return random_value_impl(t, env, rng, max_bag, max_depth);
}

}  // namespace mfl

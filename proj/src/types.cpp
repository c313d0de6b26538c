#include "mfl/types.hpp"

#include <cctype>
#include <functional>
#include <sstream>

#include "mfl/error.hpp"
#include "mfl/value.hpp"

namespace mfl {

// ---------------------------------------------------------------------------
// TypeExpr

TypeExpr TypeExpr::tensor(Shape shape) {
  return TypeExpr(Kind::Tensor, std::move(shape), {}, {});
}
TypeExpr TypeExpr::sum(std::vector<TypeExpr> args) {
  return TypeExpr(Kind::Sum, {}, std::move(args), {});
}
TypeExpr TypeExpr::prod(std::vector<TypeExpr> args) {
  return TypeExpr(Kind::Prod, {}, std::move(args), {});
}
TypeExpr TypeExpr::mset(TypeExpr element) {
  return TypeExpr(Kind::MSet, {}, {std::move(element)}, {});
}
TypeExpr TypeExpr::ref(std::string name) {
  return TypeExpr(Kind::Ref, {}, {}, std::move(name));
}
TypeExpr TypeExpr::enumeration(std::size_t l) {
  return sum(std::vector<TypeExpr>(l, unit()));
}
TypeExpr TypeExpr::option(TypeExpr t) { return sum({unit(), std::move(t)}); }

std::string TypeExpr::to_string() const {
  std::ostringstream out;
  auto list = [&](const char* head) {
    out << head << '[';
    for (std::size_t i = 0; i < args_.size(); ++i) {
      out << (i ? "," : "") << args_[i].to_string();
    }
    out << ']';
  };
  switch (kind_) {
    case Kind::Tensor:
      out << "Tensor[";
      for (std::size_t i = 0; i < shape_.size(); ++i) out << (i ? "," : "") << shape_[i];
      out << ']';
      break;
    case Kind::Sum:
      list("Sum");
      break;
    case Kind::Prod:
      list("Prod");
      break;
    case Kind::MSet:
      list("MSet");
      break;
    case Kind::Ref:
      out << name_;
      break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// SchemaEnv

bool SchemaEnv::contains(const std::string& name) const { return defs_.count(name) > 0; }

const TypeExpr& SchemaEnv::definition(const std::string& name) const {
  auto it = defs_.find(name);
  if (it == defs_.end()) throw SchemaError("unresolved reference '" + name + "'");
  return it->second;
}

bool SchemaEnv::is_user_name(const std::string& name) const {
  return user_set_.count(name) > 0;
}

bool SchemaEnv::is_recursive(const std::string& name) const {
  return recursive_.count(name) > 0;
}

const TypeExpr& SchemaEnv::resolve(const TypeExpr& t) const {
  const TypeExpr* cur = &t;
  std::size_t hops = 0;
  while (cur->kind() == TypeExpr::Kind::Ref) {
    cur = &definition(cur->name());
    if (++hops > defs_.size() + 1) {
      throw SchemaError("reference cycle without a constructor at '" + t.name() + "'");
    }
  }
  return *cur;
}

TypeExpr SchemaEnv::expand(const TypeExpr& t) const {
  switch (t.kind()) {
    case TypeExpr::Kind::Tensor:
      return t;
    case TypeExpr::Kind::Ref:
      if (is_recursive(t.name())) return t;
      return expand(definition(t.name()));
    case TypeExpr::Kind::MSet:
      return TypeExpr::mset(expand(t.args()[0]));
    case TypeExpr::Kind::Sum:
    case TypeExpr::Kind::Prod: {
      std::vector<TypeExpr> args;
      for (const auto& a : t.args()) args.push_back(expand(a));
      return t.kind() == TypeExpr::Kind::Sum ? TypeExpr::sum(std::move(args))
                                             : TypeExpr::prod(std::move(args));
    }
  }
  return t;
}

void SchemaEnv::check_resolved(const TypeExpr& t) const {
  if (t.kind() == TypeExpr::Kind::Ref) {
    definition(t.name());
    return;
  }
  for (const auto& a : t.args()) check_resolved(a);
}

void SchemaEnv::define(const std::string& name, TypeExpr body, bool user_written) {
  if (defs_.count(name)) throw SchemaError("duplicate definition '" + name + "'");
  defs_.emplace(name, std::move(body));
  if (user_written) {
    user_names_.push_back(name);
    user_set_.insert(name);
  }
}

namespace {

void collect_refs(const TypeExpr& t, std::set<std::string>& out) {
  if (t.kind() == TypeExpr::Kind::Ref) {
    out.insert(t.name());
    return;
  }
  for (const auto& a : t.args()) collect_refs(a, out);
}

bool mentions_any(const TypeExpr& t, const std::set<std::string>& names) {
  if (t.kind() == TypeExpr::Kind::Ref) return names.count(t.name()) > 0;
  for (const auto& a : t.args()) {
    if (mentions_any(a, names)) return true;
  }
  return false;
}

// True when every path from t to a reference inside the component passes
// through a Sum with an alternative that leaves the component.
bool guarded(const TypeExpr& t, const std::set<std::string>& component) {
  switch (t.kind()) {
    case TypeExpr::Kind::Tensor:
      return true;
    case TypeExpr::Kind::Ref:
      return component.count(t.name()) == 0;
    case TypeExpr::Kind::Sum:
      for (const auto& a : t.args()) {
        if (!mentions_any(a, component)) return true;
      }
      [[fallthrough]];
    default:
      for (const auto& a : t.args()) {
        if (!guarded(a, component)) return false;
      }
      return true;
  }
}

}  // namespace

void SchemaEnv::finalize() {
  for (const auto& [name, body] : defs_) check_resolved(body);

  // Reachability over the reference graph.
  std::map<std::string, std::set<std::string>> edges, reach;
  for (const auto& [name, body] : defs_) collect_refs(body, edges[name]);
  for (const auto& [name, _] : defs_) {
    std::set<std::string>& seen = reach[name];
    std::vector<std::string> stack(edges[name].begin(), edges[name].end());
    while (!stack.empty()) {
      std::string n = stack.back();
      stack.pop_back();
      if (!seen.insert(n).second) continue;
      for (const auto& m : edges[n]) stack.push_back(m);
    }
  }

  recursive_.clear();
  for (const auto& [name, r] : reach) {
    if (r.count(name)) recursive_.insert(name);
  }

  for (const auto& name : recursive_) {
    std::set<std::string> component;
    for (const auto& other : recursive_) {
      if (reach[name].count(other) && reach[other].count(name)) component.insert(other);
    }
    if (!guarded(defs_.at(name), component)) {
      throw SchemaError("unguarded recursion in '" + name +
                        "': every cycle must pass through a Sum with an "
                        "alternative that leaves the cycle");
    }
  }

  // Least fixpoint of inhabitation.
  inhabited_.clear();
  for (const auto& [name, _] : defs_) inhabited_[name] = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [name, body] : defs_) {
      if (!inhabited_[name] && inhabited(body)) {
        inhabited_[name] = true;
        changed = true;
      }
    }
  }
}

bool SchemaEnv::inhabited(const TypeExpr& t) const {
  switch (t.kind()) {
    case TypeExpr::Kind::Tensor:
    case TypeExpr::Kind::MSet:
      return true;
    case TypeExpr::Kind::Ref: {
      auto it = inhabited_.find(t.name());
      return it != inhabited_.end() && it->second;
    }
    case TypeExpr::Kind::Sum:
      for (const auto& a : t.args()) {
        if (inhabited(a)) return true;
      }
      return false;
    case TypeExpr::Kind::Prod:
      for (const auto& a : t.args()) {
        if (!inhabited(a)) return false;
      }
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum class Kind { Ident, Nat, LBracket, RBracket, Comma, Equals, End };
  Kind kind;
  std::string text;
  std::size_t line;
  std::size_t col;
};

const char* token_name(Token::Kind k) {
  switch (k) {
    case Token::Kind::Ident: return "identifier";
    case Token::Kind::Nat: return "natural number";
    case Token::Kind::LBracket: return "'['";
    case Token::Kind::RBracket: return "']'";
    case Token::Kind::Comma: return "','";
    case Token::Kind::Equals: return "'='";
    case Token::Kind::End: return "end of line";
  }
  return "?";
}

// One line of source, tokenised.
std::vector<Token> lex_line(std::string_view line, std::size_t line_no) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t col = i + 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() &&
             (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) {
        ++j;
      }
      tokens.push_back({Token::Kind::Ident, std::string(line.substr(i, j - i)), line_no, col});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      tokens.push_back({Token::Kind::Nat, std::string(line.substr(i, j - i)), line_no, col});
      i = j;
    } else {
      Token::Kind k;
      switch (c) {
        case '[': k = Token::Kind::LBracket; break;
        case ']': k = Token::Kind::RBracket; break;
        case ',': k = Token::Kind::Comma; break;
        case '=': k = Token::Kind::Equals; break;
        default:
          throw SchemaError("syntax error at line " + std::to_string(line_no) + ", column " +
                            std::to_string(col) + ": unexpected character '" +
                            std::string(1, c) + "'");
      }
      tokens.push_back({k, std::string(1, c), line_no, col});
      ++i;
    }
  }
  tokens.push_back({Token::Kind::End, "", line_no, line.size() + 1});
  return tokens;
}

// Unresolved syntax: a head identifier with optional bracketed arguments.
struct RawType {
  std::string head;
  std::vector<RawType> args;
  std::vector<std::size_t> nats;
  bool bracketed = false;
  std::size_t line = 0;
  std::size_t col = 0;
};

struct RawDef {
  std::string name;
  std::vector<std::string> params;
  RawType body;
  std::size_t line = 0;
};

bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw = {"Tensor", "Vector", "Scal", "Unit",
                                           "Sum",    "Prod",   "MSet", "Enum",
                                           "Bool",   "Option", "List"};
  return kw.count(s) > 0;
}

bool takes_nats(const std::string& head) {
  return head == "Tensor" || head == "Vector" || head == "Enum";
}

class LineParser {
 public:
  explicit LineParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  RawDef definition() {
    RawDef def;
    const Token& name = expect(Token::Kind::Ident);
    def.name = name.text;
    def.line = name.line;
    if (accept(Token::Kind::LBracket)) {
      def.params.push_back(expect(Token::Kind::Ident).text);
      while (accept(Token::Kind::Comma)) def.params.push_back(expect(Token::Kind::Ident).text);
      expect(Token::Kind::RBracket);
    }
    expect(Token::Kind::Equals);
    def.body = type();
    expect(Token::Kind::End);
    return def;
  }

  RawType whole_type() {
    RawType t = type();
    expect(Token::Kind::End);
    return t;
  }

 private:
  RawType type() {
    const Token& head = expect(Token::Kind::Ident);
    RawType t;
    t.head = head.text;
    t.line = head.line;
    t.col = head.col;
    if (!accept(Token::Kind::LBracket)) return t;
    t.bracketed = true;
    if (takes_nats(t.head)) {
      t.nats.push_back(std::stoull(expect(Token::Kind::Nat).text));
      while (accept(Token::Kind::Comma)) {
        t.nats.push_back(std::stoull(expect(Token::Kind::Nat).text));
      }
      expect(Token::Kind::RBracket);
      return t;
    }
    if (accept(Token::Kind::RBracket)) return t;
    t.args.push_back(type());
    while (accept(Token::Kind::Comma)) t.args.push_back(type());
    expect(Token::Kind::RBracket);
    return t;
  }

  bool accept(Token::Kind k) {
    if (tokens_[pos_].kind != k) return false;
    ++pos_;
    return true;
  }

  const Token& expect(Token::Kind k) {
    const Token& t = tokens_[pos_];
    if (t.kind != k) {
      std::string found = t.kind == Token::Kind::End ? "end of line" : "'" + t.text + "'";
      throw SchemaError("syntax error at line " + std::to_string(t.line) + ", column " +
                        std::to_string(t.col) + ": expected " + token_name(k) +
                        ", found " + found);
    }
    ++pos_;
    return t;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string where(const RawType& t) {
  return "line " + std::to_string(t.line) + ", column " + std::to_string(t.col);
}

class Resolver {
 public:
  Resolver(SchemaEnv& env, std::map<std::string, RawDef> raw)
      : env_(env), raw_(std::move(raw)) {}

  void define_user(const RawDef& def) {
    if (!def.params.empty()) return;  // instantiated on use
    if (env_.contains(def.name)) return;
    in_progress_.insert(def.name);
    TypeExpr body = expand(def.body, {}, 0);
    in_progress_.erase(def.name);
    if (!env_.contains(def.name)) env_.define(def.name, std::move(body), true);
  }

  TypeExpr expand(const RawType& t, const std::map<std::string, TypeExpr>& subst,
                  std::size_t depth) {
    auto arity = [&](std::size_t n) {
      if (t.args.size() != n) {
        throw SchemaError(t.head + " takes exactly " + std::to_string(n) +
                          " type argument" + (n == 1 ? "" : "s") + " (got " +
                          std::to_string(t.args.size()) + ") at " + where(t));
      }
    };
    auto nat_count = [&](std::size_t n) {
      if (!t.bracketed || t.nats.size() != n) {
        throw SchemaError(t.head + " takes exactly " + std::to_string(n) +
                          " length argument at " + where(t));
      }
    };
    auto no_brackets = [&] {
      if (t.bracketed) throw SchemaError(t.head + " takes no arguments at " + where(t));
    };
    auto children = [&] {
      std::vector<TypeExpr> out;
      for (const auto& a : t.args) out.push_back(expand(a, subst, depth));
      return out;
    };

    const std::string& h = t.head;
    if (h == "Tensor") {
      if (!t.bracketed || t.nats.empty()) {
        throw SchemaError("Tensor needs at least one axis length at " + where(t));
      }
      return TypeExpr::tensor(t.nats);
    }
    if (h == "Vector") {
      nat_count(1);
      return TypeExpr::vec(t.nats[0]);
    }
    if (h == "Enum") {
      nat_count(1);
      return TypeExpr::enumeration(t.nats[0]);
    }
    if (h == "Scal") {
      no_brackets();
      return TypeExpr::scal();
    }
    if (h == "Unit") {
      no_brackets();
      return TypeExpr::unit();
    }
    if (h == "Bool") {
      no_brackets();
      return TypeExpr::boolean();
    }
    if (h == "Sum" || h == "Prod") {
      if (!t.bracketed) throw SchemaError(h + " needs a bracketed argument list at " + where(t));
      return h == "Sum" ? TypeExpr::sum(children()) : TypeExpr::prod(children());
    }
    if (h == "MSet") {
      arity(1);
      return TypeExpr::mset(expand(t.args[0], subst, depth));
    }
    if (h == "Option") {
      arity(1);
      return TypeExpr::option(expand(t.args[0], subst, depth));
    }
    if (h == "List") {
      arity(1);
      TypeExpr elem = expand(t.args[0], subst, depth);
      std::string name = "List[" + elem.to_string() + "]";
      if (!env_.contains(name)) {
        env_.define(name,
                    TypeExpr::sum({TypeExpr::unit(), TypeExpr::prod({elem, TypeExpr::ref(name)})}),
                    false);
      }
      return TypeExpr::ref(name);
    }

    // Type parameter or user definition.
    if (auto it = subst.find(h); it != subst.end()) {
      if (t.bracketed) throw SchemaError("type parameter '" + h + "' takes no arguments");
      return it->second;
    }
    auto it = raw_.find(h);
    if (it == raw_.end()) {
      if (env_.contains(h) && !t.bracketed) return TypeExpr::ref(h);
      throw SchemaError("unresolved reference '" + h + "' at " + where(t));
    }
    const RawDef& def = it->second;
    if (def.params.empty()) {
      if (t.bracketed) throw SchemaError("'" + h + "' takes no type arguments at " + where(t));
      if (!env_.contains(h) && !in_progress_.count(h)) {
        in_progress_.insert(h);
        TypeExpr body = expand(def.body, {}, depth);
        in_progress_.erase(h);
        if (!env_.contains(h)) env_.define(h, std::move(body), true);
      }
      return TypeExpr::ref(h);
    }
    if (t.args.size() != def.params.size()) {
      throw SchemaError("'" + h + "' takes " + std::to_string(def.params.size()) +
                        " type arguments (got " + std::to_string(t.args.size()) + ") at " +
                        where(t));
    }
    std::vector<TypeExpr> args = children();
    std::string name = h + "[";
    for (std::size_t i = 0; i < args.size(); ++i) name += (i ? "," : "") + args[i].to_string();
    name += "]";
    if (!env_.contains(name) && !in_progress_.count(name)) {
      if (depth > 32) {
        throw SchemaError("instantiation of '" + h +
                          "' does not terminate (non-regular recursion)");
      }
      std::map<std::string, TypeExpr> inner;
      for (std::size_t i = 0; i < args.size(); ++i) inner.emplace(def.params[i], args[i]);
      in_progress_.insert(name);
      TypeExpr body = expand(def.body, inner, depth + 1);
      in_progress_.erase(name);
      if (!env_.contains(name)) env_.define(name, std::move(body), false);
    }
    return TypeExpr::ref(name);
  }

 private:
  SchemaEnv& env_;
  std::map<std::string, RawDef> raw_;
  std::set<std::string> in_progress_;
};

// Plain user definitions are kept in source order so user_names() is stable.
std::vector<RawDef> parse_definitions(std::string_view text) {
  std::vector<RawDef> defs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    auto tokens = lex_line(line, line_no);
    if (tokens.size() > 1) defs.push_back(LineParser(std::move(tokens)).definition());
    start = end + 1;
  }
  return defs;
}

}  // namespace

SchemaEnv parse_schema(std::string_view text) {
  std::vector<RawDef> defs = parse_definitions(text);
  std::map<std::string, RawDef> raw;
  for (const auto& d : defs) {
    if (is_keyword(d.name)) {
      throw SchemaError("line " + std::to_string(d.line) + ": '" + d.name +
                        "' is a built-in type and cannot be redefined");
    }
    std::set<std::string> seen;
    for (const auto& p : d.params) {
      if (is_keyword(p) || !seen.insert(p).second) {
        throw SchemaError("line " + std::to_string(d.line) + ": bad type parameter '" + p + "'");
      }
    }
    if (!raw.emplace(d.name, d).second) {
      throw SchemaError("line " + std::to_string(d.line) + ": duplicate definition '" +
                        d.name + "'");
    }
  }
  SchemaEnv env;
  Resolver resolver(env, raw);
  for (const auto& d : defs) resolver.define_user(d);
  env.finalize();
  return env;
}

TypeExpr parse_type(std::string_view text, SchemaEnv& env) {
  auto tokens = lex_line(text, 1);
  RawType raw = LineParser(std::move(tokens)).whole_type();
  Resolver resolver(env, {});
  TypeExpr t = resolver.expand(raw, {}, 0);
  env.finalize();
  return t;
}

// ---------------------------------------------------------------------------
// Subtyping

namespace {

bool subtype(const TypeExpr& a, const TypeExpr& b, const SchemaEnv& env,
             std::set<std::pair<std::string, std::string>>& assumed) {
  if (a.kind() == TypeExpr::Kind::Ref || b.kind() == TypeExpr::Kind::Ref) {
    if (a == b) return true;
    auto key = std::make_pair(a.to_string(), b.to_string());
    if (assumed.count(key)) return true;  // coinductive hypothesis
    assumed.insert(key);
    const TypeExpr& ra = a.kind() == TypeExpr::Kind::Ref ? env.definition(a.name()) : a;
    const TypeExpr& rb = b.kind() == TypeExpr::Kind::Ref ? env.definition(b.name()) : b;
    return subtype(ra, rb, env, assumed);
  }
  if (a.kind() != b.kind()) return false;
  const auto& xs = a.args();
  const auto& ys = b.args();
  switch (a.kind()) {
    case TypeExpr::Kind::Tensor:
      return a.shape() == b.shape();
    case TypeExpr::Kind::MSet:
      return subtype(xs[0], ys[0], env, assumed);
    case TypeExpr::Kind::Sum:
      if (xs.size() > ys.size()) return false;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!subtype(xs[i], ys[i], env, assumed)) return false;
      }
      return true;
    case TypeExpr::Kind::Prod:
      if (xs.size() < ys.size()) return false;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        if (!subtype(xs[i], ys[i], env, assumed)) return false;
      }
      return true;
    case TypeExpr::Kind::Ref:
      break;
  }
  return false;
}

}  // namespace

bool is_subtype(const TypeExpr& a, const TypeExpr& b, const SchemaEnv& env) {
  std::set<std::pair<std::string, std::string>> assumed;
  return subtype(a, b, env, assumed);
}

// ---------------------------------------------------------------------------
// Isomorphisms

std::vector<IsomorphicView> isomorphic_views(const TypeExpr& t, const SchemaEnv& env) {
  const TypeExpr& r = env.resolve(t);
  std::vector<IsomorphicView> views;
  switch (r.kind()) {
    case TypeExpr::Kind::Tensor: {
      const Shape& s = r.shape();
      bool has_zero = false;
      for (auto l : s) has_zero = has_zero || l == 0;
      if (has_zero && s != Shape{0}) {
        views.push_back({IsomorphicView::Rule::UnitCollapse, TypeExpr::unit()});
      }
      if (s.size() >= 2 && s.back() == 1) {
        views.push_back({IsomorphicView::Rule::ScalarCollapse,
                         TypeExpr::tensor(Shape(s.begin(), s.end() - 1))});
      }
      break;
    }
    case TypeExpr::Kind::Sum:
      if (r.args().size() == 1) views.push_back({IsomorphicView::Rule::SingletonSum, r.args()[0]});
      break;
    case TypeExpr::Kind::Prod:
      if (r.args().size() == 1) {
        views.push_back({IsomorphicView::Rule::SingletonProd, r.args()[0]});
      }
      break;
    default:
      break;
  }
  return views;
}

Value to_view(const IsomorphicView& view, const Value& v) {
  switch (view.rule) {
    case IsomorphicView::Rule::ScalarCollapse: {
      Shape s = v.shape();
      s.pop_back();
      return Value::tensor(std::move(s), std::vector<double>(v.data().begin(), v.data().end()));
    }
    case IsomorphicView::Rule::UnitCollapse:
      return Value::unit();
    case IsomorphicView::Rule::SingletonSum:
      return v.payload();
    case IsomorphicView::Rule::SingletonProd:
      return v.items().at(0);
  }
  return v;
}

Value from_view(const IsomorphicView& view, const TypeExpr& original, const Value& v) {
  switch (view.rule) {
    case IsomorphicView::Rule::ScalarCollapse: {
      Shape s = v.shape();
      s.push_back(1);
      return Value::tensor(std::move(s), std::vector<double>(v.data().begin(), v.data().end()));
    }
    case IsomorphicView::Rule::UnitCollapse:
      return Value::tensor(original.shape(), {});
    case IsomorphicView::Rule::SingletonSum:
      return Value::tagged(1, v);
    case IsomorphicView::Rule::SingletonProd:
      return Value::tuple({v});
  }
  return v;
}

// ---------------------------------------------------------------------------
// Conformance

namespace {

std::string shape_text(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

std::optional<std::string> check(const TypeExpr& t, const Value& v, const SchemaEnv& env,
                                 const std::string& path) {
  const TypeExpr& r = env.resolve(t);
  auto fail = [&](const std::string& what) {
    return std::optional<std::string>(what + " at " + path);
  };
  switch (r.kind()) {
    case TypeExpr::Kind::Tensor:
      if (v.kind() != Value::Kind::Tensor) return fail("expected a tensor");
      if (v.shape() != r.shape()) {
        return fail("shape mismatch (expected " + shape_text(r.shape()) + ", got " +
                    shape_text(v.shape()) + ")");
      }
      return std::nullopt;
    case TypeExpr::Kind::Sum:
      if (v.kind() != Value::Kind::Tagged) return fail("expected a tagged value");
      if (v.tag() < 1 || v.tag() > r.args().size()) {
        return fail("tag " + std::to_string(v.tag()) + " out of range 1.." +
                    std::to_string(r.args().size()));
      }
      return check(r.args()[v.tag() - 1], v.payload(), env, path + "|" + std::to_string(v.tag()));
    case TypeExpr::Kind::Prod:
      if (v.kind() != Value::Kind::Tuple) return fail("expected a tuple");
      if (v.items().size() != r.args().size()) return fail("arity mismatch");
      for (std::size_t i = 0; i < v.items().size(); ++i) {
        if (auto d = check(r.args()[i], v.items()[i], env, path + "." + std::to_string(i + 1))) {
          return d;
        }
      }
      return std::nullopt;
    case TypeExpr::Kind::MSet:
      if (v.kind() != Value::Kind::Bag) return fail("expected a multiset");
      for (std::size_t i = 0; i < v.items().size(); ++i) {
        if (auto d = check(r.args()[0], v.items()[i], env, path + "{" + std::to_string(i + 1) + "}")) {
          return d;
        }
      }
      return std::nullopt;
    case TypeExpr::Kind::Ref:
      break;
  }
  return fail("unresolved type");
}

}  // namespace

std::optional<std::string> check_value(const TypeExpr& t, const Value& v, const SchemaEnv& env) {
  return check(t, v, env, "root");
}

}  // namespace mfl

#include "mfl/wire.hpp"

#include "mfl/error.hpp"

namespace mfl {

using nlohmann::json;

namespace {

const json& only_member(const json& j, const char* key) {
  if (j.size() != 1) {
    throw ValueError("value record must have exactly one of t/s/p/m/u: " + j.dump());
  }
  return j.at(key);
}

std::vector<Value> items_from(const json& arr) {
  if (!arr.is_array()) throw ValueError("expected an array of values: " + arr.dump());
  std::vector<Value> items;
  items.reserve(arr.size());
  for (const auto& x : arr) items.push_back(value_from_json(x));
  return items;
}

}  // namespace

Value value_from_json(const json& j) {
  try {
    if (j.is_number()) return Value::scalar(j.get<double>());
    if (!j.is_object()) throw ValueError("unrecognised value record: " + j.dump());
    if (j.contains("t")) {
      const json& t = only_member(j, "t");
      auto shape = t.at("shape").get<std::vector<std::size_t>>();
      auto data = t.at("data").get<std::vector<double>>();
      return Value::tensor(std::move(shape), std::move(data));
    }
    if (j.contains("s")) {
      const json& s = only_member(j, "s");
      auto tag = s.at("tag").get<long long>();
      if (tag < 1) throw ValueError("sum tags are 1-based: " + j.dump());
      return Value::tagged(static_cast<std::size_t>(tag), value_from_json(s.at("v")));
    }
    if (j.contains("p")) return Value::tuple(items_from(only_member(j, "p")));
    if (j.contains("m")) return Value::bag(items_from(only_member(j, "m")));
    if (j.contains("u")) {
      if (only_member(j, "u") != true) throw ValueError("unit record must be {\"u\": true}");
      return Value::unit();
    }
  } catch (const json::exception& e) {
    throw ValueError(std::string("malformed value record: ") + e.what());
  }
  throw ValueError("unrecognised value record: " + j.dump());
}

json value_to_json(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Tensor:
      if (v.shape() == Shape{0}) return json{{"u", true}};
      return json{{"t",
                   {{"shape", v.shape()},
                    {"data", std::vector<double>(v.data().begin(), v.data().end())}}}};
    case Value::Kind::Tagged:
      return json{{"s", {{"tag", v.tag()}, {"v", value_to_json(v.payload())}}}};
    case Value::Kind::Tuple:
    case Value::Kind::Bag: {
      json arr = json::array();
      for (const auto& x : v.items()) arr.push_back(value_to_json(x));
      return json{{v.kind() == Value::Kind::Tuple ? "p" : "m", arr}};
    }
  }
  return json();
}

Value parse_value(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValueError(std::string("invalid JSON: ") + e.what());
  }
  return value_from_json(j);
}

std::string format_value(const Value& v) { return value_to_json(v).dump(); }

}  // namespace mfl

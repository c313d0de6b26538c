#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "mfl/value.hpp"

namespace mfl {

// Line-delimited value records:
//   tensor {"t": {"shape": [..], "data": [..]}}   (a bare number means Scal)
//   sum    {"s": {"tag": k, "v": <value>}}        (k is 1-based)
//   prod   {"p": [<value>, ...]}
//   mset   {"m": [<value>, ...]}
//   unit   {"u": true}

Value value_from_json(const nlohmann::json& j);
nlohmann::json value_to_json(const Value& v);

Value parse_value(std::string_view text);
std::string format_value(const Value& v);

}  // namespace mfl

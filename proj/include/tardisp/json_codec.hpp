#pragma once

#include <json.hpp>

#include "tardisp/engine.hpp"
#include "tardisp/relation.hpp"
#include "tardisp/value.hpp"

namespace tardisp {

using Json = nlohmann::ordered_json;

// NULL -> null, BOOLEAN -> bool, INTEGER -> integer, DOUBLE -> number with
// a fraction or exponent, TEXT -> string. Round-trips exactly.
Json value_to_json(const Value& v);
Value value_from_json(const Json& j);

// {"columns": [{"name", "type"}], "rows": [[...]]}; `offset`/`limit` page
// the rows.
Json relation_to_json(const Relation& rel, std::size_t offset = 0, std::size_t limit = SIZE_MAX);
Relation relation_from_json(const Json& j);

// {"name": {"kind": "scalar", "value": v} | {"kind": "table", "relation": r}}
Json environment_to_json(const Environment& env);
Environment environment_from_json(const Json& j);

}  // namespace tardisp

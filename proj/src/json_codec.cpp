#include "tardisp/json_codec.hpp"

#include "tardisp/error.hpp"

namespace tardisp {

Json value_to_json(const Value& v) {
  switch (v.type()) {
    case Type::Null: return nullptr;
    case Type::Bool: return v.as_bool();
    case Type::Int: return v.as_int();
    case Type::Float: return v.as_float();
    case Type::Text: return v.as_text();
  }
  return nullptr;
}

Value value_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return Value{};
    case Json::value_t::boolean: return Value::boolean(j.get<bool>());
    case Json::value_t::number_integer: return Value::integer(j.get<int64_t>());
    case Json::value_t::number_unsigned: {
      auto u = j.get<uint64_t>();
      if (u > static_cast<uint64_t>(INT64_MAX)) throw Error(ErrorCode::BadRequest, "integer out of range");
      return Value::integer(static_cast<int64_t>(u));
    }
    case Json::value_t::number_float: return Value::real(j.get<double>());
    case Json::value_t::string: return Value::text(j.get<std::string>());
    default: throw Error(ErrorCode::BadRequest, "not a scalar value: " + j.dump());
  }
}

Json relation_to_json(const Relation& rel, std::size_t offset, std::size_t limit) {
  Json cols = Json::array();
  for (const auto& c : rel.columns) cols.push_back({{"name", c.name}, {"type", type_name(c.type)}});
  Json rows = Json::array();
  for (std::size_t i = offset; i < rel.rows.size() && i - offset < limit; ++i) {
    Json row = Json::array();
    for (const auto& v : rel.rows[i]) row.push_back(value_to_json(v));
    rows.push_back(std::move(row));
  }
  return {{"columns", std::move(cols)}, {"rows", std::move(rows)}};
}

Relation relation_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("columns") || !j.contains("rows")) {
    throw Error(ErrorCode::BadRequest, "relation needs columns and rows");
  }
  Relation rel;
  for (const auto& c : j.at("columns")) {
    Column col;
    if (c.is_string()) {
      col.name = c.get<std::string>();
    } else {
      col.name = c.at("name").get<std::string>();
      if (c.contains("type")) {
        auto t = parse_type_name(c.at("type").get<std::string>());
        if (!t) throw Error(ErrorCode::BadRequest, "unknown type " + c.at("type").dump());
        col.type = *t;
      }
    }
    rel.columns.push_back(std::move(col));
  }
  for (const auto& r : j.at("rows")) {
    if (!r.is_array() || r.size() != rel.columns.size()) throw Error(ErrorCode::BadRequest, "row arity mismatch");
    Row row;
    for (std::size_t i = 0; i < r.size(); ++i) {
      Value v = value_from_json(r[i]);
      if (rel.columns[i].type != Type::Null) {
        auto c = coerce_to(v, rel.columns[i].type);
        if (!c) throw Error(ErrorCode::BadRequest, "value " + r[i].dump() + " does not fit column " + rel.columns[i].name);
        v = *c;
      }
      row.push_back(std::move(v));
    }
    rel.rows.push_back(std::move(row));
  }
  return rel;
}

Json environment_to_json(const Environment& env) {
  Json out = Json::object();
  for (const auto& [name, b] : env.bindings()) {
    if (std::holds_alternative<Value>(b)) {
      out[name] = {{"kind", "scalar"}, {"value", value_to_json(std::get<Value>(b))}};
    } else {
      out[name] = {{"kind", "table"}, {"relation", relation_to_json(*std::get<TableBinding>(b))}};
    }
  }
  return out;
}

// Accepts the tagged form above, and as a shorthand plain JSON scalars and
// bare relation objects.
Environment environment_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadRequest, "arguments must be a JSON object");
  Environment env;
  for (const auto& [name, b] : j.items()) {
    if (b.is_object() && b.contains("kind")) {
      auto kind = b.at("kind").get<std::string>();
      if (kind == "scalar") {
        env.set_scalar(name, value_from_json(b.at("value")));
      } else if (kind == "table") {
        env.set_table(name, relation_from_json(b.at("relation")));
      } else {
        throw Error(ErrorCode::BadRequest, "unknown binding kind " + kind);
      }
    } else if (b.is_object()) {
      env.set_table(name, relation_from_json(b));
    } else {
      env.set_scalar(name, value_from_json(b));
    }
  }
  return env;
}

}  // namespace tardisp

#include "tardisp/value.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>

#include "tardisp/error.hpp"
#include "tardisp/relation.hpp"

namespace tardisp {

std::string_view type_name(Type type) {
  switch (type) {
    case Type::Null: return "NULL";
    case Type::Bool: return "BOOLEAN";
    case Type::Int: return "INT";
    case Type::Float: return "DOUBLE";
    case Type::Text: return "TEXT";
  }
  return "?";
}

std::optional<Type> parse_type_name(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "INT" || upper == "INTEGER" || upper == "BIGINT" || upper == "SMALLINT") return Type::Int;
  if (upper == "DOUBLE" || upper == "FLOAT" || upper == "REAL" || upper == "DECIMAL") return Type::Float;
  if (upper == "TEXT" || upper == "VARCHAR" || upper == "NVARCHAR" || upper == "STRING") return Type::Text;
  if (upper == "BOOLEAN" || upper == "BOOL") return Type::Bool;
  return std::nullopt;
}

std::size_t Value::hash() const noexcept {
  switch (type()) {
    case Type::Null: return 0x9e3779b9u;
    case Type::Bool: return as_bool() ? 0x51u : 0x52u;
    case Type::Int: return std::hash<int64_t>{}(as_int());
    case Type::Float: {
      // -0.0 and 0.0 compare equal.
      double d = as_float();
      if (d == 0.0) d = 0.0;
      return std::hash<double>{}(d) ^ 0x7f4a7c15u;
    }
    case Type::Text: return std::hash<std::string>{}(as_text());
  }
  return 0;
}

namespace {

int type_rank(Type t) {
  switch (t) {
    case Type::Null: return 0;
    case Type::Bool: return 1;
    case Type::Int:
    case Type::Float: return 2;
    case Type::Text: return 3;
  }
  return 4;
}

int compare_numeric(const Value& a, const Value& b) {
  if (a.type() == Type::Int && b.type() == Type::Int) {
    return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int() ? 1 : 0);
  }
  long double x = a.type() == Type::Int ? static_cast<long double>(a.as_int()) : a.as_float();
  long double y = b.type() == Type::Int ? static_cast<long double>(b.as_int()) : b.as_float();
  if (x < y) return -1;
  if (x > y) return 1;
  return 0;
}

}  // namespace

int compare_total(const Value& a, const Value& b) {
  int ra = type_rank(a.type());
  int rb = type_rank(b.type());
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (a.type()) {
    case Type::Null: return 0;
    case Type::Bool: return static_cast<int>(a.as_bool()) - static_cast<int>(b.as_bool());
    case Type::Int:
    case Type::Float: {
      int c = compare_numeric(a, b);
      if (c != 0) return c;
      if (a.type() != b.type()) return a.type() == Type::Int ? -1 : 1;
      return 0;
    }
    case Type::Text: {
      int c = a.as_text().compare(b.as_text());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
  }
  return 0;
}

std::optional<int> compare_sql(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return std::nullopt;
  if (a.is_numeric() && b.is_numeric()) return compare_numeric(a, b);
  if (a.type() != b.type()) {
    throw Error(ErrorCode::TypeMismatch, "cannot compare " + std::string(type_name(a.type())) +
                                             " with " + std::string(type_name(b.type())));
  }
  return compare_total(a, b);
}

namespace {

std::string format_double(double d) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  std::string s(buf.data(), res.ptr);
  if (std::isfinite(d) && s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

std::string to_display(const Value& v) {
  switch (v.type()) {
    case Type::Null: return "NULL";
    case Type::Bool: return v.as_bool() ? "true" : "false";
    case Type::Int: return std::to_string(v.as_int());
    case Type::Float: return format_double(v.as_float());
    case Type::Text: return v.as_text();
  }
  return {};
}

std::string to_sql_literal(const Value& v) {
  switch (v.type()) {
    case Type::Null: return "NULL";
    case Type::Bool: return v.as_bool() ? "TRUE" : "FALSE";
    case Type::Int: return std::to_string(v.as_int());
    case Type::Float: return format_double(v.as_float());
    case Type::Text: {
      std::string out = "'";
      for (char c : v.as_text()) {
        if (c == '\'') out += '\'';
        out += c;
      }
      out += '\'';
      return out;
    }
  }
  return {};
}

std::optional<Value> coerce_to(const Value& v, Type type) {
  if (v.is_null() || v.type() == type) return v;
  if (type == Type::Float && v.type() == Type::Int) return Value::real(static_cast<double>(v.as_int()));
  return std::nullopt;
}

int compare_rows(const Row& a, const Row& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare_total(a[i], b[i]);
    if (c != 0) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

std::size_t RowHash::operator()(const Row& row) const noexcept {
  std::size_t h = 0xcbf29ce484222325ull;
  for (const auto& v : row) h = (h ^ v.hash()) * 0x100000001b3ull;
  return h;
}

std::optional<std::size_t> Relation::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

bool operator==(const Relation& a, const Relation& b) {
  if (a.columns.size() != b.columns.size()) return false;
  for (std::size_t i = 0; i < a.columns.size(); ++i) {
    if (a.columns[i].name != b.columns[i].name || a.columns[i].type != b.columns[i].type) return false;
  }
  return a.rows == b.rows;
}

void sort_rows(Relation& rel) {
  std::sort(rel.rows.begin(), rel.rows.end(),
            [](const Row& x, const Row& y) { return compare_rows(x, y) < 0; });
}

std::string to_display(const Relation& rel, std::size_t max_rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> width(rel.columns.size(), 0);
  std::vector<std::string> header;
  for (std::size_t c = 0; c < rel.columns.size(); ++c) {
    header.push_back(rel.columns[c].name);
    width[c] = header.back().size();
  }
  std::size_t shown = std::min(max_rows, rel.rows.size());
  for (std::size_t r = 0; r < shown; ++r) {
    std::vector<std::string> line;
    for (std::size_t c = 0; c < rel.columns.size(); ++c) {
      line.push_back(to_display(rel.rows[r][c]));
      width[c] = std::max(width[c], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  auto emit = [&](const std::vector<std::string>& line) {
    std::string out;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out += " | ";
      out += line[c];
      out.append(width[c] - line[c].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + (width.empty() ? 0 : 3 * (width.size() - 1)), '-') + "\n";
  for (const auto& line : cells) out += emit(line);
  if (shown < rel.rows.size()) out += "... (" + std::to_string(rel.rows.size()) + " rows)\n";
  return out;
}

}  // namespace tardisp

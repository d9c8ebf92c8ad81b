#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tardisp {

enum class Type : uint8_t { Null, Bool, Int, Float, Text };

std::string_view type_name(Type type);

/// Accepts the SQL spellings used in DDL and declarations (INT, BIGINT,
/// DOUBLE, VARCHAR, ...). Case-insensitive.
std::optional<Type> parse_type_name(std::string_view name);

/// A single SQL value: NULL, BOOLEAN, 64-bit INTEGER, DOUBLE or TEXT.
class Value {
 public:
  Value() = default;

  static Value boolean(bool b) { return Value(Storage(std::in_place_index<1>, b)); }
  static Value integer(int64_t i) { return Value(Storage(std::in_place_index<2>, i)); }
  static Value real(double d) { return Value(Storage(std::in_place_index<3>, d)); }
  static Value text(std::string s) { return Value(Storage(std::in_place_index<4>, std::move(s))); }

  Type type() const noexcept { return static_cast<Type>(v_.index()); }
  bool is_null() const noexcept { return v_.index() == 0; }
  bool is_numeric() const noexcept { return type() == Type::Int || type() == Type::Float; }

  bool as_bool() const { return std::get<1>(v_); }
  int64_t as_int() const { return std::get<2>(v_); }
  double as_float() const { return std::get<3>(v_); }
  const std::string& as_text() const { return std::get<4>(v_); }

  /// Numeric value widened to double. Precondition: is_numeric().
  double to_double() const { return type() == Type::Int ? static_cast<double>(as_int()) : as_float(); }

  std::size_t hash() const noexcept;

  /// Exact identity: same type and same payload.
  friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }

 private:
  using Storage = std::variant<std::monostate, bool, int64_t, double, std::string>;
  explicit Value(Storage v) : v_(std::move(v)) {}
  Storage v_;
};

/// Total order used for ORDER BY, GROUP BY and deterministic output: NULL
/// first, then booleans, numbers (Int and Float compared numerically, Int
/// first on ties), then text. Returns <0, 0, >0.
int compare_total(const Value& a, const Value& b);

/// SQL comparison under three-valued logic: nullopt when either side is
/// NULL. Throws TypeMismatch for incomparable types.
std::optional<int> compare_sql(const Value& a, const Value& b);

/// Human-readable rendering (NULL, true, 42, 1.5, text without quotes).
std::string to_display(const Value& v);

/// SQL literal rendering that the frontend parses back to the same value.
std::string to_sql_literal(const Value& v);

/// Checks `v` against a column type, widening Int to Float. NULL fits any
/// type. Returns nullopt when the value does not fit.
std::optional<Value> coerce_to(const Value& v, Type type);

using Row = std::vector<Value>;

int compare_rows(const Row& a, const Row& b);

struct RowHash {
  std::size_t operator()(const Row& row) const noexcept;
};

struct ValueHash {
  std::size_t operator()(const Value& v) const noexcept { return v.hash(); }
};

}  // namespace tardisp

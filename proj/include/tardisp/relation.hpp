#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tardisp/value.hpp"

namespace tardisp {

/// Where an output column's values come from when it is a plain reference
/// to a base-table column. `source` identifies the FROM/JOIN instance in the
/// producing query so that two aliases of the same table stay distinct.
struct ColumnOrigin {
  std::string table;
  std::string column;
  int source = -1;
  // Set when the column reached the query through a table variable rather
  // than a direct scan; values then reflect the variable's assignment time.
  bool via_variable = false;

  friend bool operator==(const ColumnOrigin&, const ColumnOrigin&) = default;
};

struct Column {
  std::string name;
  Type type = Type::Null;
  std::optional<ColumnOrigin> origin;
};

struct Relation {
  std::vector<Column> columns;
  std::vector<Row> rows;

  std::size_t arity() const { return columns.size(); }
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  std::optional<std::size_t> column_index(std::string_view name) const;

  /// Column names, column types and rows; origins are metadata and ignored.
  friend bool operator==(const Relation& a, const Relation& b);
};

/// Sorts rows under the total value order (the engine's default output order).
void sort_rows(Relation& rel);

std::string to_display(const Relation& rel, std::size_t max_rows = 50);

}  // namespace tardisp

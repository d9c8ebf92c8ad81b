#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tardisp/relation.hpp"
#include "tardisp/value.hpp"

namespace tardisp {

/// Logical clock value. One tick per executed procedure instruction or user
/// DML statement; step numbers and database timestamps share this clock.
using LogicalTime = uint64_t;

inline constexpr LogicalTime kEndOfTime = std::numeric_limits<LogicalTime>::max();

struct ColumnDef {
  std::string name;
  Type type = Type::Int;

  friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<std::string> primary_key;

  std::optional<std::size_t> column_index(std::string_view column) const;
  std::vector<std::size_t> key_indices() const;
  bool is_key_column(std::string_view column) const;

  /// Throws InvalidQuery on duplicate columns, empty or unknown key columns.
  void validate() const;

  friend bool operator==(const TableDef&, const TableDef&) = default;
};

/// One immutable row version valid over [valid_from, valid_to).
///
/// `values` and `valid_from` never change after the version is written;
/// `valid_to` moves once from kEndOfTime to a finite time, under the owning
/// table's exclusive lock.
struct TupleVersion {
  uint64_t row_id = 0;
  LogicalTime valid_from = 0;
  LogicalTime valid_to = kEndOfTime;
  Row values;

  bool visible_at(LogicalTime t) const { return valid_from <= t && t < valid_to; }
};

using RowPredicate = std::function<bool(const Row&)>;

struct Assignment {
  std::string column;
  std::function<Value(const Row&)> compute;
};

class Table;

/// In-memory insert-only relational store with a global logical clock.
///
/// Concurrency contract: one writer at a time (callers serialize through
/// acquire_writer()); any number of readers may call the const accessors
/// concurrently with that writer for times <= clock(). Version storage never
/// relocates, so the pointers returned by visible_versions() stay valid for
/// the lifetime of the Database.
class Database {
 public:
  Database();
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  /// Deep copy: same tables, versions and clock.
  std::unique_ptr<Database> clone() const;

  void create_table(TableDef def);
  bool has_table(std::string_view name) const;
  const TableDef& table_def(std::string_view name) const;
  std::vector<std::string> table_names() const;

  LogicalTime clock() const noexcept { return clock_.load(std::memory_order_acquire); }
  LogicalTime advance_clock();

  std::size_t apply_insert(std::string_view table, std::span<const Row> rows, LogicalTime at);
  std::size_t apply_update(std::string_view table, const RowPredicate& predicate,
                           const std::vector<Assignment>& assignments, LogicalTime at);
  std::size_t apply_delete(std::string_view table, const RowPredicate& predicate, LogicalTime at);

  Relation scan_asof(std::string_view table, LogicalTime at) const;
  std::vector<const TupleVersion*> visible_versions(std::string_view table, LogicalTime at) const;

  /// Copies of every version ever written to `table`, in write order.
  std::vector<TupleVersion> history(std::string_view table) const;

  /// The logical row whose primary key equals `key` at time `at`.
  std::optional<uint64_t> row_id_for_key(std::string_view table, const Row& key, LogicalTime at) const;

  /// All versions of one logical row ordered by valid_from.
  std::vector<TupleVersion> row_chain(std::string_view table, uint64_t row_id) const;

  /// Every version that ever carried primary key `key`, in write order.
  std::vector<TupleVersion> key_versions(std::string_view table, const Row& key) const;

  std::size_t version_count(std::string_view table) const;

  std::unique_lock<std::mutex> acquire_writer() { return std::unique_lock(writer_); }

 private:
  Table& table(std::string_view name);
  const Table& table(std::string_view name) const;
  void check_time(LogicalTime at) const;

  mutable std::shared_mutex tables_mutex_;
  std::map<std::string, std::unique_ptr<Table>, std::less<>> tables_;
  std::atomic<LogicalTime> clock_{0};
  std::mutex writer_;
};

}  // namespace tardisp

#include "tardisp/storage.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "tardisp/error.hpp"

namespace tardisp {

std::optional<std::size_t> TableDef::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> TableDef::key_indices() const {
  std::vector<std::size_t> out;
  for (const auto& k : primary_key) out.push_back(*column_index(k));
  return out;
}

bool TableDef::is_key_column(std::string_view column) const {
  return std::find(primary_key.begin(), primary_key.end(), column) != primary_key.end();
}

void TableDef::validate() const {
  if (name.empty()) throw Error(ErrorCode::InvalidQuery, "table name is empty");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) {
      throw Error(ErrorCode::InvalidQuery, "duplicate column '" + c.name + "' in table " + name);
    }
    if (c.type == Type::Null) throw Error(ErrorCode::InvalidQuery, "column '" + c.name + "' has no type");
  }
  if (primary_key.empty()) throw Error(ErrorCode::InvalidQuery, "table " + name + " needs a primary key");
  std::set<std::string> key_seen;
  for (const auto& k : primary_key) {
    if (!seen.count(k)) throw Error(ErrorCode::UnknownColumn, "primary key column '" + k + "' not in table " + name);
    if (!key_seen.insert(k).second) throw Error(ErrorCode::InvalidQuery, "primary key column '" + k + "' repeated");
  }
}

class Table {
 public:
  explicit Table(TableDef def) : def_(std::move(def)), key_(def_.key_indices()) {}

  Table(const Table& other) : def_(other.def_), key_(other.key_) {
    std::shared_lock lock(other.mutex_);
    versions_ = other.versions_;
    current_ = other.current_;
    chain_ = other.chain_;
    by_key_ = other.by_key_;
    next_row_id_ = other.next_row_id_;
  }

  const TableDef& def() const { return def_; }

  Row key_of(const Row& row) const {
    Row key;
    key.reserve(key_.size());
    for (auto i : key_) key.push_back(row[i]);
    return key;
  }

  Row checked_row(const Row& row) const {
    if (row.size() != def_.columns.size()) {
      throw Error(ErrorCode::TypeMismatch, "table " + def_.name + " expects " + std::to_string(def_.columns.size()) +
                                               " values, got " + std::to_string(row.size()));
    }
    Row out;
    out.reserve(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      auto v = coerce_to(row[i], def_.columns[i].type);
      if (!v) {
        throw Error(ErrorCode::TypeMismatch, "value " + to_sql_literal(row[i]) + " does not fit column " + def_.name +
                                                 "." + def_.columns[i].name + " of type " +
                                                 std::string(type_name(def_.columns[i].type)));
      }
      out.push_back(std::move(*v));
    }
    for (auto i : key_) {
      if (out[i].is_null()) {
        throw Error(ErrorCode::PrimaryKeyViolation, "NULL in primary key column " + def_.name + "." + def_.columns[i].name);
      }
    }
    return out;
  }

  std::size_t insert(std::span<const Row> rows, LogicalTime at) {
    std::vector<Row> checked;
    checked.reserve(rows.size());
    std::unordered_set<Row, RowHash> batch_keys;
    {
      std::shared_lock lock(mutex_);
      for (const auto& r : rows) {
        checked.push_back(checked_row(r));
        Row key = key_of(checked.back());
        if (current_.count(key) || !batch_keys.insert(key).second) {
          throw Error(ErrorCode::PrimaryKeyViolation, "duplicate primary key in " + def_.name);
        }
      }
    }
    std::unique_lock lock(mutex_);
    for (auto& r : checked) append(next_row_id_++, at, std::move(r));
    return checked.size();
  }

  std::size_t update(const RowPredicate& predicate, const std::vector<Assignment>& assignments, LogicalTime at) {
    for (const auto& a : assignments) {
      if (!def_.column_index(a.column)) {
        throw Error(ErrorCode::UnknownColumn, "unknown column " + def_.name + "." + a.column);
      }
    }
    auto matched = matching_current(predicate);
    if (matched.empty()) return 0;

    std::vector<Row> updated;
    updated.reserve(matched.size());
    std::unordered_set<Row, RowHash> superseded;
    for (const auto* v : matched) superseded.insert(key_of(v->values));
    std::unordered_set<Row, RowHash> new_keys;
    for (const auto* v : matched) {
      if (v->valid_from == at) {
        throw Error(ErrorCode::ClockMismatch, "row in " + def_.name + " already written at time " + std::to_string(at));
      }
      Row next = v->values;
      for (const auto& a : assignments) next[*def_.column_index(a.column)] = a.compute(v->values);
      next = checked_row(next);
      Row key = key_of(next);
      if (!new_keys.insert(key).second) {
        throw Error(ErrorCode::PrimaryKeyViolation, "update produces duplicate primary key in " + def_.name);
      }
      updated.push_back(std::move(next));
    }
    {
      std::shared_lock lock(mutex_);
      for (const auto& k : new_keys) {
        if (current_.count(k) && !superseded.count(k)) {
          throw Error(ErrorCode::PrimaryKeyViolation, "update collides with existing primary key in " + def_.name);
        }
      }
    }
    std::unique_lock lock(mutex_);
    for (std::size_t i = 0; i < matched.size(); ++i) {
      auto& old = const_cast<TupleVersion&>(*matched[i]);
      old.valid_to = at;
      current_.erase(key_of(old.values));
    }
    for (std::size_t i = 0; i < matched.size(); ++i) append(matched[i]->row_id, at, std::move(updated[i]));
    return matched.size();
  }

  std::size_t erase(const RowPredicate& predicate, LogicalTime at) {
    auto matched = matching_current(predicate);
    for (const auto* v : matched) {
      if (v->valid_from == at) {
        throw Error(ErrorCode::ClockMismatch, "row in " + def_.name + " already written at time " + std::to_string(at));
      }
    }
    std::unique_lock lock(mutex_);
    for (const auto* v : matched) {
      auto& old = const_cast<TupleVersion&>(*v);
      old.valid_to = at;
      current_.erase(key_of(old.values));
    }
    return matched.size();
  }

  std::vector<const TupleVersion*> visible(LogicalTime t) const {
    std::shared_lock lock(mutex_);
    std::vector<const TupleVersion*> out;
    for (const auto& v : versions_) {
      if (v.visible_at(t)) out.push_back(&v);
    }
    return out;
  }

  std::vector<TupleVersion> all() const {
    std::shared_lock lock(mutex_);
    return {versions_.begin(), versions_.end()};
  }

  std::optional<uint64_t> row_id_for_key(const Row& key, LogicalTime at) const {
    std::shared_lock lock(mutex_);
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return std::nullopt;
    for (auto idx : it->second) {
      if (versions_[idx].visible_at(at)) return versions_[idx].row_id;
    }
    return std::nullopt;
  }

  std::vector<TupleVersion> key_versions(const Row& key) const {
    std::shared_lock lock(mutex_);
    std::vector<TupleVersion> out;
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return out;
    for (auto idx : it->second) out.push_back(versions_[idx]);
    return out;
  }

  std::vector<TupleVersion> chain(uint64_t row_id) const {
    std::shared_lock lock(mutex_);
    std::vector<TupleVersion> out;
    auto it = chain_.find(row_id);
    if (it == chain_.end()) return out;
    for (auto idx : it->second) out.push_back(versions_[idx]);
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return versions_.size();
  }

 private:
  // Caller holds the exclusive lock.
  void append(uint64_t row_id, LogicalTime at, Row values) {
    std::size_t idx = versions_.size();
    Row key = key_of(values);
    versions_.push_back(TupleVersion{row_id, at, kEndOfTime, std::move(values)});
    current_[key] = idx;
    chain_[row_id].push_back(idx);
    by_key_[std::move(key)].push_back(idx);
  }

  // Predicates run without the table lock held: they may read this table
  // through the engine. Writers are serialized by the Database contract.
  std::vector<const TupleVersion*> matching_current(const RowPredicate& predicate) const {
    std::vector<const TupleVersion*> candidates;
    {
      std::shared_lock lock(mutex_);
      std::vector<std::size_t> indices;
      indices.reserve(current_.size());
      for (const auto& [key, idx] : current_) indices.push_back(idx);
      std::sort(indices.begin(), indices.end());
      candidates.reserve(indices.size());
      for (auto idx : indices) candidates.push_back(&versions_[idx]);
    }
    std::vector<const TupleVersion*> out;
    for (const auto* v : candidates) {
      if (predicate(v->values)) out.push_back(v);
    }
    return out;
  }

  TableDef def_;
  std::vector<std::size_t> key_;
  mutable std::shared_mutex mutex_;
  std::deque<TupleVersion> versions_;
  std::unordered_map<Row, std::size_t, RowHash> current_;
  std::unordered_map<uint64_t, std::vector<std::size_t>> chain_;
  std::unordered_map<Row, std::vector<std::size_t>, RowHash> by_key_;
  uint64_t next_row_id_ = 1;
};

Database::Database() = default;
Database::~Database() = default;

std::unique_ptr<Database> Database::clone() const {
  auto copy = std::make_unique<Database>();
  std::shared_lock lock(tables_mutex_);
  for (const auto& [name, t] : tables_) copy->tables_.emplace(name, std::make_unique<Table>(*t));
  copy->clock_.store(clock());
  return copy;
}

void Database::create_table(TableDef def) {
  def.validate();
  std::unique_lock lock(tables_mutex_);
  if (tables_.count(def.name)) throw Error(ErrorCode::DuplicateTable, "table " + def.name + " already exists");
  std::string name = def.name;
  tables_.emplace(std::move(name), std::make_unique<Table>(std::move(def)));
}

bool Database::has_table(std::string_view name) const {
  std::shared_lock lock(tables_mutex_);
  return tables_.find(name) != tables_.end();
}

Table& Database::table(std::string_view name) {
  std::shared_lock lock(tables_mutex_);
  auto it = tables_.find(name);
  if (it == tables_.end()) throw Error(ErrorCode::UnknownTable, "unknown table " + std::string(name));
  return *it->second;
}

const Table& Database::table(std::string_view name) const {
  return const_cast<Database*>(this)->table(name);
}

const TableDef& Database::table_def(std::string_view name) const { return table(name).def(); }

std::vector<std::string> Database::table_names() const {
  std::shared_lock lock(tables_mutex_);
  std::vector<std::string> out;
  for (const auto& [name, t] : tables_) out.push_back(name);
  return out;
}

LogicalTime Database::advance_clock() { return clock_.fetch_add(1, std::memory_order_acq_rel) + 1; }

void Database::check_time(LogicalTime at) const {
  if (at != clock()) {
    throw Error(ErrorCode::ClockMismatch,
                "write at time " + std::to_string(at) + " but clock is " + std::to_string(clock()));
  }
}

std::size_t Database::apply_insert(std::string_view name, std::span<const Row> rows, LogicalTime at) {
  auto& t = table(name);
  check_time(at);
  return t.insert(rows, at);
}

std::size_t Database::apply_update(std::string_view name, const RowPredicate& predicate,
                                   const std::vector<Assignment>& assignments, LogicalTime at) {
  auto& t = table(name);
  check_time(at);
  return t.update(predicate, assignments, at);
}

std::size_t Database::apply_delete(std::string_view name, const RowPredicate& predicate, LogicalTime at) {
  auto& t = table(name);
  check_time(at);
  return t.erase(predicate, at);
}

Relation Database::scan_asof(std::string_view name, LogicalTime at) const {
  const auto& t = table(name);
  Relation rel;
  for (const auto& c : t.def().columns) {
    rel.columns.push_back(Column{c.name, c.type, ColumnOrigin{t.def().name, c.name, 0, false}});
  }
  for (const auto* v : t.visible(at)) rel.rows.push_back(v->values);
  return rel;
}

std::vector<const TupleVersion*> Database::visible_versions(std::string_view name, LogicalTime at) const {
  return table(name).visible(at);
}

std::vector<TupleVersion> Database::history(std::string_view name) const { return table(name).all(); }

std::optional<uint64_t> Database::row_id_for_key(std::string_view name, const Row& key, LogicalTime at) const {
  return table(name).row_id_for_key(key, at);
}

std::vector<TupleVersion> Database::row_chain(std::string_view name, uint64_t row_id) const {
  return table(name).chain(row_id);
}

std::vector<TupleVersion> Database::key_versions(std::string_view name, const Row& key) const {
  return table(name).key_versions(key);
}

std::size_t Database::version_count(std::string_view name) const { return table(name).size(); }

}  // namespace tardisp

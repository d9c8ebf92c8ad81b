#include "tardisp/fixture.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tardisp/error.hpp"
#include "tardisp/parser.hpp"

namespace tardisp {

std::vector<std::vector<CsvField>> parse_csv(std::string_view text) {
  std::vector<std::vector<CsvField>> records;
  std::vector<CsvField> record;
  CsvField field;
  std::size_t i = 0;
  std::size_t line = 1;
  bool at_field_start = true;
  bool any = false;  // anything seen on the current record

  auto end_field = [&] {
    record.push_back(std::move(field));
    field = {};
    at_field_start = true;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  while (i < text.size()) {
    char c = text[i];
    if (at_field_start && c == '"') {
      field.quoted = true;
      at_field_start = false;
      any = true;
      ++i;
      for (;;) {
        if (i >= text.size()) throw Error(ErrorCode::FixtureError, "unterminated quoted field at line " + std::to_string(line));
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.text += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (text[i] == '\n') ++line;
        field.text += text[i++];
      }
      if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        throw Error(ErrorCode::FixtureError, "unexpected character after quoted field at line " + std::to_string(line));
      }
      continue;
    }
    if (c == ',') {
      end_field();
      any = true;
      ++i;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      ++i;
      ++line;
      if (any || !field.text.empty()) {
        end_record();
      } else {
        field = {};  // blank line
      }
    } else {
      if (field.quoted) throw Error(ErrorCode::FixtureError, "stray character after quote at line " + std::to_string(line));
      field.text += c;
      at_field_start = false;
      any = true;
      ++i;
    }
  }
  if (any || !field.text.empty()) end_record();
  return records;
}

Value parse_field(const CsvField& field, Type type) {
  if (!field.quoted && field.text.empty()) return Value{};
  const std::string& s = field.text;
  auto bad = [&] {
    return Error(ErrorCode::FixtureError, "cannot read '" + s + "' as " + std::string(type_name(type)));
  };
  switch (type) {
    case Type::Int: {
      int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw bad();
      return Value::integer(v);
    }
    case Type::Float: {
      double v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw bad();
      return Value::real(v);
    }
    case Type::Bool: {
      std::string lower;
      for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == "true" || lower == "1") return Value::boolean(true);
      if (lower == "false" || lower == "0") return Value::boolean(false);
      throw bad();
    }
    case Type::Text: return Value::text(s);
    case Type::Null: break;
  }
  throw bad();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FixtureError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void load_fixture(Database& db, const std::filesystem::path& dir) {
  if (db.clock() != 0) throw Error(ErrorCode::FixtureError, "fixture must be loaded into an empty database");
  auto schema = dir / "schema.sql";
  if (!std::filesystem::exists(schema)) throw Error(ErrorCode::FixtureError, "missing " + schema.string());
  auto defs = parse_ddl(read_text_file(schema));
  for (const auto& def : defs) db.create_table(def);

  LogicalTime t = db.advance_clock();
  for (const auto& def : defs) {
    auto csv = dir / (def.name + ".csv");
    if (!std::filesystem::exists(csv)) continue;
    auto records = parse_csv(read_text_file(csv));
    if (records.empty()) continue;
    std::vector<std::size_t> map;
    for (const auto& h : records[0]) {
      auto idx = def.column_index(h.text);
      if (!idx) throw Error(ErrorCode::FixtureError, csv.filename().string() + ": unknown column " + h.text);
      map.push_back(*idx);
    }
    std::vector<Row> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (records[r].size() != map.size()) {
        throw Error(ErrorCode::FixtureError, csv.filename().string() + ": record " + std::to_string(r + 1) + " has " +
                                                 std::to_string(records[r].size()) + " fields, expected " +
                                                 std::to_string(map.size()));
      }
      Row row(def.columns.size());
      for (std::size_t c = 0; c < map.size(); ++c) row[map[c]] = parse_field(records[r][c], def.columns[map[c]].type);
      rows.push_back(std::move(row));
    }
    try {
      db.apply_insert(def.name, rows, t);
    } catch (const Error& e) {
      throw Error(ErrorCode::FixtureError, csv.filename().string() + ": " + e.what());
    }
  }
}

}  // namespace tardisp

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tardisp/storage.hpp"

namespace tardisp {

/// One CSV field. `quoted` distinguishes `""` (empty text) from an empty
/// unquoted field (NULL).
struct CsvField {
  std::string text;
  bool quoted = false;
};

/// RFC-4180 records: comma separated, `"` quoting with `""` escapes, CRLF or
/// LF line ends, quoted fields may span lines. Throws FixtureError.
std::vector<std::vector<CsvField>> parse_csv(std::string_view text);

/// Converts a CSV field to a column value. Empty unquoted field is NULL.
Value parse_field(const CsvField& field, Type type);

/// Loads `schema.sql` from `dir` and, for every table, `<table>.csv` when
/// present (header row names the columns, in any order, missing columns are
/// NULL). All rows are inserted at logical time 1, so the clock must be 0.
void load_fixture(Database& db, const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace tardisp

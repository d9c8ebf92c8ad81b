#pragma once

// Readable gtest failure output for core types.

#include <ostream>

#include "tardisp/relation.hpp"
#include "tardisp/value.hpp"

namespace tardisp {

inline void PrintTo(const Value& v, std::ostream* os) { *os << to_sql_literal(v); }
inline void PrintTo(const Relation& r, std::ostream* os) { *os << "\n" << to_display(r); }

}  // namespace tardisp

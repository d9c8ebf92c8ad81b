#pragma once

#include <json.hpp>

#include "tardisp/ast.hpp"

namespace tardisp {

// Stable structural dumps used for golden files and the /source endpoint.
nlohmann::ordered_json expr_to_json(const Expr& e);
nlohmann::ordered_json query_to_json(const QueryAst& q);
nlohmann::ordered_json procedure_to_json(const ProcedureAst& proc);

}  // namespace tardisp

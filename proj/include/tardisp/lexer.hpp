#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tardisp/error.hpp"

namespace tardisp {

enum class TokenKind { Ident, QuotedIdent, Integer, Float, String, Symbol, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;  // identifier / literal payload (unescaped) or symbol spelling
  SourcePos pos;
  std::size_t end_offset = 0;
};

/// Splits SQL / procedure source into tokens. `--` starts a line comment.
/// Throws SyntaxError on unterminated strings or unexpected characters.
std::vector<Token> tokenize(std::string_view source);

/// Reserved words cannot be used as unquoted identifiers. STEP is
/// deliberately not reserved: it only has meaning after AT.
bool is_reserved_word(std::string_view word);

bool iequals(std::string_view a, std::string_view b);

}  // namespace tardisp

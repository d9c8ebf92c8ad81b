#include "tardisp/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace tardisp {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

bool is_reserved_word(std::string_view word) {
  static constexpr std::array<std::string_view, 50> kReserved = {
      "SELECT", "FROM",    "WHERE",  "GROUP",  "ORDER",  "BY",     "LIMIT",  "JOIN",   "INNER",  "LEFT",
      "OUTER",  "ON",      "AS",     "AND",    "OR",     "NOT",    "NULL",   "TRUE",   "FALSE",  "IS",
      "IN",     "EXISTS",  "CASE",   "WHEN",   "THEN",   "ELSE",   "END",    "AT",     "ASC",    "DESC",
      "INSERT", "INTO",    "VALUES", "UPDATE", "SET",    "DELETE", "IF",     "WHILE",  "DO",     "DECLARE",
      "BEGIN",  "SUM",     "COUNT",  "MIN",    "MAX",    "AVG",    "COALESCE", "CREATE", "PROCEDURE", "DEFAULT"};
  return std::any_of(kReserved.begin(), kReserved.end(), [&](std::string_view k) { return iequals(k, word); });
}

namespace {

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = pos_;
      if (at_end()) {
        t.kind = TokenKind::End;
        t.end_offset = pos_.offset;
        out.push_back(std::move(t));
        return out;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = TokenKind::Ident;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) t.text += get();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else if (c == '\'') {
        t.kind = TokenKind::String;
        t.text = lex_quoted('\'', "string literal");
      } else if (c == '"') {
        t.kind = TokenKind::QuotedIdent;
        t.text = lex_quoted('"', "quoted identifier");
      } else {
        t.kind = TokenKind::Symbol;
        t.text = lex_symbol();
      }
      t.end_offset = pos_.offset;
      out.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return pos_.offset >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_.offset + ahead < src_.size() ? src_[pos_.offset + ahead] : '\0';
  }
  char get() {
    char c = src_[pos_.offset++];
    if (c == '\n') {
      ++pos_.line;
      pos_.col = 1;
    } else {
      ++pos_.col;
    }
    return c;
  }

  void skip_space() {
    while (!at_end()) {
      if (std::isspace(static_cast<unsigned char>(peek()))) {
        get();
      } else if (peek() == '-' && peek(1) == '-') {
        while (!at_end() && peek() != '\n') get();
      } else {
        break;
      }
    }
  }

  void lex_number(Token& t) {
    t.kind = TokenKind::Integer;
    while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += get();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      t.kind = TokenKind::Float;
      t.text += get();
      while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += get();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (std::isdigit(static_cast<unsigned char>(peek(1))) ||
         ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
      t.kind = TokenKind::Float;
      t.text += get();
      if (peek() == '+' || peek() == '-') t.text += get();
      while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += get();
    }
  }

  std::string lex_quoted(char quote, const char* what) {
    SourcePos start = pos_;
    get();
    std::string out;
    for (;;) {
      if (at_end()) throw Error(ErrorCode::SyntaxError, std::string("unterminated ") + what, start);
      char c = get();
      if (c == quote) {
        if (peek() == quote) {
          out += get();
          continue;
        }
        return out;
      }
      out += c;
    }
  }

  std::string lex_symbol() {
    static constexpr std::array<std::string_view, 5> kTwoChar = {"!=", "<>", "<=", ">=", ":="};
    for (auto s : kTwoChar) {
      if (peek() == s[0] && peek(1) == s[1]) {
        get();
        get();
        return std::string(s);
      }
    }
    char c = peek();
    static constexpr std::string_view kSingle = "(),.;:!=<>+-*/%";
    if (kSingle.find(c) == std::string_view::npos) {
      throw Error(ErrorCode::SyntaxError, std::string("unexpected character '") + c + "'", pos_);
    }
    get();
    return std::string(1, c);
  }

  std::string_view src_;
  SourcePos pos_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace tardisp

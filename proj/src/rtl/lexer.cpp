// SPDX-License-Identifier: Apache-2.0
#include "itertl/rtl/lexer.hpp"

#include <algorithm>
#include <array>

namespace itertl::rtl {
namespace {

// IEEE 1364-2005 reserved words, sorted for binary search.
constexpr std::array<std::string_view, 124> kKeywords = {
    "always",       "and",          "assign",       "automatic",     "begin",
    "buf",          "bufif0",       "bufif1",       "case",          "casex",
    "casez",        "cell",         "cmos",         "config",        "deassign",
    "default",      "defparam",     "design",       "disable",       "edge",
    "else",         "end",          "endcase",      "endconfig",     "endfunction",
    "endgenerate",  "endmodule",    "endprimitive", "endspecify",    "endtable",
    "endtask",      "event",        "for",          "force",         "forever",
    "fork",         "function",     "generate",     "genvar",        "highz0",
    "highz1",       "if",           "ifnone",       "incdir",        "include",
    "initial",      "inout",        "input",        "instance",      "integer",
    "join",         "large",        "liblist",      "library",       "localparam",
    "macromodule",  "medium",       "module",       "nand",          "negedge",
    "nmos",         "nor",          "noshowcancelled", "not",        "notif0",
    "notif1",       "or",           "output",       "parameter",     "pmos",
    "posedge",      "primitive",    "pull0",        "pull1",         "pulldown",
    "pullup",       "pulsestyle_ondetect", "pulsestyle_onevent", "rcmos", "real",
    "realtime",     "reg",          "release",      "repeat",        "rnmos",
    "rpmos",        "rtran",        "rtranif0",     "rtranif1",      "scalared",
    "showcancelled", "signed",      "small",        "specify",       "specparam",
    "strong0",      "strong1",      "supply0",      "supply1",       "table",
    "task",         "time",         "tran",         "tranif0",       "tranif1",
    "tri",          "tri0",         "tri1",         "triand",        "trior",
    "trireg",       "unsigned",     "use",          "uwire",         "vectored",
    "wait",         "wand",         "weak0",        "weak1",         "while",
    "wire",         "wor",          "xnor",         "xor",
};

constexpr std::array<std::string_view, 8> kGatePrimitives = {"and", "buf", "nand", "nor",
                                                             "not", "or",  "xnor", "xor"};

constexpr std::array<std::string_view, 14> kDirectives = {
    "begin_keywords", "celldefine", "default_nettype", "define", "else",     "elsif",   "end_keywords",
    "endcelldefine",  "endif",      "ifdef",           "ifndef", "include",  "resetall", "timescale",
};

// Longest match first.
constexpr std::array<std::string_view, 22> kMultiCharOps = {
    "<<<", ">>>", "===", "!==", "**", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "~&",  "~|",  "~^", "^~", "->", "+:", "-:", "=>", "*>",
};

constexpr std::string_view kSingleCharOps = "+-*/%<>!~&|^=?";
constexpr std::string_view kPunctuation = "()[]{};,:.#@";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ident_start(char c) { return is_alpha(c) || c == '_'; }
bool is_ident_char(char c) { return is_alpha(c) || is_digit(c) || c == '_' || c == '$'; }
bool is_base_char(char c) {
  return c == 'b' || c == 'B' || c == 'o' || c == 'O' || c == 'd' || c == 'D' || c == 'h' || c == 'H';
}
bool is_based_digit(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F') || c == 'x' || c == 'X' ||
         c == 'z' || c == 'Z' || c == '?' || c == '_';
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    TokenStream out;
    while (pos_ < src_.size()) out.push_back(next());
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  Token make(TokenKind kind, std::size_t begin, bool malformed = false) const {
    return Token{kind, src_.substr(begin, pos_ - begin), Span{begin, pos_}, malformed};
  }

  void skip_to_eol() {
    while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
  }

  // Consumes an optional based literal tail starting at '.
  bool based_tail() {
    std::size_t p = pos_;
    if (p >= src_.size() || src_[p] != '\'') return false;
    ++p;
    if (p < src_.size() && (src_[p] == 's' || src_[p] == 'S')) ++p;
    if (p >= src_.size() || !is_base_char(src_[p])) return false;
    ++p;
    const std::size_t digits = p;
    while (p < src_.size() && is_based_digit(src_[p])) ++p;
    if (p == digits) return false;
    pos_ = p;
    return true;
  }

  Token number(std::size_t begin) {
    while (is_digit(peek()) || peek() == '_') ++pos_;
    if (based_tail()) return make(TokenKind::number, begin);
    if (peek() == '.' && is_digit(peek(1))) {
      ++pos_;
      while (is_digit(peek()) || peek() == '_') ++pos_;
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
      pos_ += 2;
      while (is_digit(peek()) || peek() == '_') ++pos_;
    }
    return make(TokenKind::number, begin);
  }

  Token next() {
    const std::size_t begin = pos_;
    const char c = src_[pos_];

    if (is_space(c)) {
      while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
      return make(TokenKind::whitespace, begin);
    }
    if (c == '/' && peek(1) == '/') {
      skip_to_eol();
      return make(TokenKind::comment, begin);
    }
    if (c == '/' && peek(1) == '*') {
      const std::size_t close = src_.find("*/", pos_ + 2);
      if (close == std::string_view::npos) {
        pos_ = src_.size();
        return make(TokenKind::comment, begin, true);
      }
      pos_ = close + 2;
      return make(TokenKind::comment, begin);
    }
    if (c == '`') {
      ++pos_;
      const std::size_t name = pos_;
      while (is_ident_char(peek())) ++pos_;
      const std::string_view word = src_.substr(name, pos_ - name);
      if (std::find(kDirectives.begin(), kDirectives.end(), word) != kDirectives.end()) {
        // Directive lines (with backslash continuations for `define).
        while (pos_ < src_.size()) {
          skip_to_eol();
          if (pos_ > begin && src_[pos_ - 1] == '\\' && pos_ < src_.size()) {
            ++pos_;
            continue;
          }
          break;
        }
        return make(TokenKind::comment, begin);
      }
      if (word.empty()) return make(TokenKind::op, begin, true);
      return make(TokenKind::identifier, begin);  // macro usage
    }
    if (is_ident_start(c)) {
      while (is_ident_char(peek())) ++pos_;
      const std::string_view word = src_.substr(begin, pos_ - begin);
      return make(is_keyword(word) ? TokenKind::keyword : TokenKind::identifier, begin);
    }
    if (c == '$' && is_ident_char(peek(1))) {
      ++pos_;
      while (is_ident_char(peek())) ++pos_;
      return make(TokenKind::identifier, begin);
    }
    if (c == '\\' && pos_ + 1 < src_.size() && !is_space(src_[pos_ + 1])) {
      ++pos_;
      while (pos_ < src_.size() && !is_space(src_[pos_])) ++pos_;
      return make(TokenKind::identifier, begin);
    }
    if (is_digit(c)) return number(begin);
    if (c == '\'') {
      if (based_tail()) return make(TokenKind::number, begin);
      ++pos_;
      return make(TokenKind::op, begin, true);
    }
    if (c == '"') {
      ++pos_;
      while (pos_ < src_.size()) {
        const char s = src_[pos_];
        if (s == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] != '\n') {
          pos_ += 2;
          continue;
        }
        if (s == '\n') break;
        ++pos_;
        if (s == '"') return make(TokenKind::string, begin);
      }
      return make(TokenKind::string, begin, true);
    }
    for (std::string_view op : kMultiCharOps) {
      if (src_.substr(pos_, op.size()) == op) {
        pos_ += op.size();
        return make(TokenKind::op, begin);
      }
    }
    if (kSingleCharOps.find(c) != std::string_view::npos) {
      ++pos_;
      return make(TokenKind::op, begin);
    }
    if (kPunctuation.find(c) != std::string_view::npos) {
      ++pos_;
      return make(TokenKind::punctuation, begin);
    }
    // Unknown run: everything up to the next byte some other rule accepts.
    ++pos_;
    while (pos_ < src_.size()) {
      const char u = src_[pos_];
      if (is_space(u) || is_ident_char(u) || u == '`' || u == '\'' || u == '"' || u == '\\' ||
          kSingleCharOps.find(u) != std::string_view::npos || kPunctuation.find(u) != std::string_view::npos) {
        break;
      }
      ++pos_;
    }
    return make(TokenKind::op, begin, true);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::keyword:
      return "keyword";
    case TokenKind::identifier:
      return "identifier";
    case TokenKind::number:
      return "number";
    case TokenKind::op:
      return "operator";
    case TokenKind::punctuation:
      return "punctuation";
    case TokenKind::string:
      return "string";
    case TokenKind::comment:
      return "comment";
    case TokenKind::whitespace:
      return "whitespace";
  }
  return "unknown";
}

bool is_keyword(std::string_view word) {
  return std::binary_search(kKeywords.begin(), kKeywords.end(), word);
}

bool is_gate_primitive(std::string_view word) {
  return std::find(kGatePrimitives.begin(), kGatePrimitives.end(), word) != kGatePrimitives.end();
}

TokenStream tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace itertl::rtl

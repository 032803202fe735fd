// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace itertl::rtl {

enum class TokenKind {
  keyword,
  identifier,
  number,
  op,  // operator
  punctuation,
  string,
  comment,  // also carries compiler directives such as `timescale
  whitespace,
};

std::string_view token_kind_name(TokenKind kind);

// Half-open byte range [begin, end) into the lexed source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  TokenKind kind = TokenKind::whitespace;
  std::string_view text;  // slice of the source; valid while the source is alive
  Span span;
  // Set for byte runs the lexer cannot classify (emitted as operators),
  // unterminated strings and unterminated block comments.
  bool malformed = false;

  bool significant() const { return kind != TokenKind::whitespace && kind != TokenKind::comment; }
};

using TokenStream = std::vector<Token>;

// Lossless and total: concatenating the text of every token reproduces the
// input byte-for-byte, whatever the input is.
TokenStream tokenize(std::string_view source);

bool is_keyword(std::string_view word);
bool is_gate_primitive(std::string_view word);

}  // namespace itertl::rtl

// SPDX-License-Identifier: Apache-2.0
#include "itertl/rtl/analyzer.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace itertl::rtl {
namespace {

constexpr int kMaxNesting = 200;

constexpr std::array<std::string_view, 25> kBinaryOps = {
    "+",  "-",  "*",  "/",  "%", "**", "==", "!=",  "===", "!==", "&&", "||", "&",
    "|",  "^",  "~^", "^~", "<", "<=", ">",  ">=",  "<<",  ">>",  "<<<", ">>>",
};

constexpr std::array<std::string_view, 11> kUnaryOps = {"+", "-", "!", "~", "&", "|",
                                                        "^", "~&", "~|", "~^", "^~"};

constexpr std::array<std::string_view, 12> kNetTypes = {"wire", "reg",     "integer", "tri",
                                                        "wand", "wor",     "supply0", "supply1",
                                                        "real", "time",    "uwire",   "realtime"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

struct ParseError {
  Diagnostic diag;
};

class Parser {
 public:
  Parser(std::string_view source, const TokenStream& all) : source_size_(source.size()) {
    for (const Token& t : all) {
      if (t.significant()) toks_.push_back(&t);
    }
  }

  void parse_source() {
    if (eof()) fail_here("empty source: expected 'module'");
    while (!eof()) {
      if (at_keyword("module") || at_keyword("macromodule")) {
        parse_module();
      } else {
        fail_here("expected 'module'");
      }
    }
  }

 private:
  // --- token access -------------------------------------------------------
  bool eof() const { return pos_ >= toks_.size(); }
  const Token* cur() const { return eof() ? nullptr : toks_[pos_]; }
  std::string_view text() const { return eof() ? std::string_view{} : toks_[pos_]->text; }
  TokenKind kind() const { return eof() ? TokenKind::whitespace : toks_[pos_]->kind; }

  bool at(std::string_view s) const {
    return !eof() && kind() != TokenKind::string && kind() != TokenKind::number && text() == s;
  }
  bool at_keyword(std::string_view s) const { return !eof() && kind() == TokenKind::keyword && text() == s; }
  bool at_identifier() const { return !eof() && kind() == TokenKind::identifier; }

  bool accept(std::string_view s) {
    if (!at(s)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail_here(const std::string& message) const {
    Span span{source_size_, source_size_};
    if (!eof()) span = toks_[pos_]->span;
    std::string msg = message;
    if (eof()) {
      msg += " (at end of input)";
    } else {
      msg += ", found '" + std::string(text()) + "'";
    }
    throw ParseError{Diagnostic{span, msg}};
  }

  void expect(std::string_view s, std::string_view context) {
    if (!accept(s)) fail_here("expected '" + std::string(s) + "' " + std::string(context));
  }

  void expect_identifier(std::string_view what) {
    if (!at_identifier()) fail_here("expected " + std::string(what));
    ++pos_;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxNesting) parser.fail_here("nesting too deep");
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  // --- modules ------------------------------------------------------------
  void parse_module() {
    ++pos_;  // module
    expect_identifier("module name");
    if (accept("#")) {
      expect("(", "to open the parameter port list");
      parse_parameter_ports();
      expect(")", "to close the parameter port list");
    }
    if (accept("(")) {
      if (!at(")")) parse_port_list();
      expect(")", "to close the port list");
    }
    expect(";", "after module header");
    while (!at_keyword("endmodule")) {
      if (eof()) fail_here("missing 'endmodule'");
      parse_module_item();
    }
    ++pos_;
  }

  void parse_parameter_ports() {
    do {
      accept("parameter");
      accept("integer");
      accept("signed");
      if (at("[")) parse_range();
      expect_identifier("parameter name");
      expect("=", "in parameter assignment");
      parse_expr();
    } while (accept(","));
  }

  void parse_port_list() {
    do {
      if (at("input") || at("output") || at("inout")) {
        ++pos_;
        accept_net_type();
        accept("signed");
        if (at("[")) parse_range();
      }
      expect_identifier("port name");
    } while (accept(","));
  }

  bool accept_net_type() {
    if (!eof() && kind() == TokenKind::keyword && contains(kNetTypes, text())) {
      ++pos_;
      return true;
    }
    return false;
  }

  void parse_module_item() {
    if (at("input") || at("output") || at("inout")) {
      ++pos_;
      accept_net_type();
      parse_declarator_list(/*allow_init=*/true);
      return;
    }
    if (!eof() && kind() == TokenKind::keyword && contains(kNetTypes, text())) {
      ++pos_;
      parse_declarator_list(/*allow_init=*/true);
      return;
    }
    if (at("parameter") || at("localparam")) {
      ++pos_;
      parse_parameter_body();
      return;
    }
    if (accept("genvar")) {
      do expect_identifier("genvar name");
      while (accept(","));
      expect(";", "after genvar declaration");
      return;
    }
    if (accept("assign")) {
      if (accept("#")) parse_delay_value();
      do {
        parse_lvalue();
        expect("=", "in continuous assignment");
        parse_expr();
      } while (accept(","));
      expect(";", "after continuous assignment");
      return;
    }
    if (accept("always")) {
      if (at("@")) parse_event_control();
      parse_statement();
      return;
    }
    if (accept("initial")) {
      parse_statement();
      return;
    }
    if (at("generate")) {
      skip_generate();
      return;
    }
    if (at("function")) {
      parse_subroutine("endfunction", /*is_function=*/true);
      return;
    }
    if (at("task")) {
      parse_subroutine("endtask", /*is_function=*/false);
      return;
    }
    if (!eof() && kind() == TokenKind::keyword && is_gate_primitive(text())) {
      parse_gate_instantiation();
      return;
    }
    if (at_identifier()) {
      parse_module_instantiation();
      return;
    }
    if (at_keyword("module") || at_keyword("macromodule")) fail_here("nested module declaration (missing 'endmodule'?)");
    fail_here("unexpected token in module body");
  }

  void parse_declarator_list(bool allow_init) {
    accept("signed");
    if (at("[")) parse_range();
    do {
      expect_identifier("declared name");
      while (at("[")) parse_range();
      if (allow_init && accept("=")) parse_expr();
    } while (accept(","));
    expect(";", "after declaration");
  }

  void parse_parameter_body() {
    accept("integer");
    accept("signed");
    if (at("[")) parse_range();
    do {
      expect_identifier("parameter name");
      expect("=", "in parameter assignment");
      parse_expr();
    } while (accept(","));
    expect(";", "after parameter declaration");
  }

  void parse_subroutine(std::string_view terminator, bool is_function) {
    ++pos_;  // function / task
    accept("automatic");
    if (is_function) {
      accept("signed");
      if (at("[")) {
        parse_range();
      } else {
        (void)(accept("integer") || accept("real") || accept("time"));
      }
    }
    expect_identifier(is_function ? "function name" : "task name");
    if (accept("(")) {
      if (!at(")")) parse_port_list();
      expect(")", "to close the argument list");
    }
    expect(";", "after subroutine header");
    while (at("input") || at("output") || at("inout") || at("reg") || at("integer") || at("real") ||
           at("time") || at("parameter") || at("localparam")) {
      if (at("parameter") || at("localparam")) {
        ++pos_;
        parse_parameter_body();
      } else {
        ++pos_;
        accept_net_type();
        parse_declarator_list(/*allow_init=*/false);
      }
    }
    while (!at(terminator)) {
      if (eof()) fail_here("missing '" + std::string(terminator) + "'");
      parse_statement();
    }
    ++pos_;
  }

  void parse_gate_instantiation() {
    ++pos_;  // primitive
    if (accept("#")) parse_delay_value();
    do {
      if (at_identifier()) {
        ++pos_;
        if (at("[")) parse_range();
      }
      expect("(", "to open gate terminals");
      parse_expr();
      while (accept(",")) parse_expr();
      expect(")", "to close gate terminals");
    } while (accept(","));
    expect(";", "after gate instantiation");
  }

  void parse_module_instantiation() {
    ++pos_;  // module type
    if (accept("#")) {
      if (accept("(")) {
        if (!at(")")) parse_connections();
        expect(")", "to close parameter overrides");
      } else {
        parse_delay_value();
      }
    }
    do {
      expect_identifier("instance name");
      if (at("[")) parse_range();
      expect("(", "to open port connections");
      if (!at(")")) parse_connections();
      expect(")", "to close port connections");
    } while (accept(","));
    expect(";", "after module instantiation");
  }

  void parse_connections() {
    if (at(".")) {
      do {
        expect(".", "before named connection");
        expect_identifier("port name");
        expect("(", "in named connection");
        if (!at(")")) parse_expr();
        expect(")", "in named connection");
      } while (accept(","));
      return;
    }
    do {
      if (!at(",") && !at(")")) parse_expr();
    } while (accept(","));
  }

  // Structure-only: a generate region must be balanced and terminated.
  void skip_generate() {
    ++pos_;  // generate
    int begin_end = 0, paren = 0, bracket = 0, brace = 0, cases = 0;
    while (!at("endgenerate")) {
      if (eof()) fail_here("missing 'endgenerate'");
      if (at("begin")) ++begin_end;
      if (at("end")) --begin_end;
      if (at("case") || at("casez") || at("casex")) ++cases;
      if (at("endcase")) --cases;
      if (at("(")) ++paren;
      if (at(")")) --paren;
      if (at("[")) ++bracket;
      if (at("]")) --bracket;
      if (at("{")) ++brace;
      if (at("}")) --brace;
      if (at("endmodule") || at("module")) fail_here("missing 'endgenerate'");
      if (begin_end < 0 || paren < 0 || bracket < 0 || brace < 0 || cases < 0) {
        fail_here("unbalanced closer in generate region");
      }
      ++pos_;
    }
    if (begin_end != 0 || paren != 0 || bracket != 0 || brace != 0 || cases != 0) {
      fail_here("unbalanced generate region");
    }
    ++pos_;
  }

  // --- behavioural statements --------------------------------------------
  void parse_event_control() {
    expect("@", "for event control");
    if (accept("*")) return;
    expect("(", "to open event list");
    if (!accept("*")) {
      do {
        if (!accept("posedge")) accept("negedge");
        parse_expr();
      } while (accept("or") || accept(","));
    }
    expect(")", "to close event list");
  }

  void parse_delay_value() {
    if (kind() == TokenKind::number || at_identifier()) {
      ++pos_;
      return;
    }
    if (accept("(")) {
      parse_expr();
      expect(")", "to close delay");
      return;
    }
    fail_here("expected delay value");
  }

  void parse_statement() {
    DepthGuard guard(*this);
    if (eof()) fail_here("expected statement");
    if (accept(";")) return;
    if (accept("begin")) {
      if (accept(":")) expect_identifier("block label");
      while (!at("end")) {
        if (eof()) fail_here("missing 'end'");
        parse_statement();
      }
      ++pos_;
      return;
    }
    if (accept("if")) {
      expect("(", "after 'if'");
      parse_expr();
      expect(")", "to close if condition");
      parse_statement();
      if (accept("else")) parse_statement();
      return;
    }
    if (accept("case") || accept("casez") || accept("casex")) {
      expect("(", "after 'case'");
      parse_expr();
      expect(")", "to close case expression");
      while (!at("endcase")) {
        if (eof()) fail_here("missing 'endcase'");
        parse_case_item();
      }
      ++pos_;
      return;
    }
    if (accept("for")) {
      expect("(", "after 'for'");
      parse_assignment();
      expect(";", "in for header");
      parse_expr();
      expect(";", "in for header");
      parse_assignment();
      expect(")", "to close for header");
      parse_statement();
      return;
    }
    if (accept("while") || accept("repeat")) {
      expect("(", "after loop keyword");
      parse_expr();
      expect(")", "to close loop condition");
      parse_statement();
      return;
    }
    if (accept("forever")) {
      parse_statement();
      return;
    }
    if (accept("#")) {
      parse_delay_value();
      parse_statement();
      return;
    }
    if (at("@")) {
      parse_event_control();
      parse_statement();
      return;
    }
    if (accept("disable")) {
      expect_identifier("block name");
      expect(";", "after disable");
      return;
    }
    if (at_identifier() && text().front() == '$') {
      ++pos_;
      if (accept("(")) {
        if (!at(")")) parse_arguments();
        expect(")", "to close system task arguments");
      }
      expect(";", "after system task");
      return;
    }
    if (at_identifier() || at("{")) {
      parse_lvalue();
      if (accept("=") || accept("<=")) {
        if (accept("#")) parse_delay_value();
        parse_expr();
        expect(";", "after procedural assignment");
        return;
      }
      if (accept("(")) {  // task enable
        if (!at(")")) parse_arguments();
        expect(")", "to close task arguments");
      }
      expect(";", "after statement");
      return;
    }
    fail_here("expected statement");
  }

  void parse_case_item() {
    if (accept("default")) {
      accept(":");
      parse_statement();
      return;
    }
    parse_expr();
    while (accept(",")) parse_expr();
    expect(":", "after case label");
    parse_statement();
  }

  void parse_assignment() {
    parse_lvalue();
    expect("=", "in assignment");
    parse_expr();
  }

  void parse_lvalue() {
    DepthGuard guard(*this);
    if (accept("{")) {
      do parse_lvalue();
      while (accept(","));
      expect("}", "to close concatenation");
      return;
    }
    expect_identifier("assignment target");
    while (at("[")) parse_select();
  }

  // --- expressions --------------------------------------------------------
  void parse_expr() {
    DepthGuard guard(*this);
    parse_unary();
    while (!eof() && kind() == TokenKind::op && contains(kBinaryOps, text())) {
      ++pos_;
      parse_unary();
    }
    if (accept("?")) {
      parse_expr();
      expect(":", "in conditional expression");
      parse_expr();
    }
  }

  void parse_unary() {
    while (!eof() && kind() == TokenKind::op && contains(kUnaryOps, text())) ++pos_;
    parse_primary();
  }

  void parse_primary() {
    DepthGuard guard(*this);
    if (eof()) fail_here("expected expression");
    if (kind() == TokenKind::number) {
      ++pos_;
      // "4 'b1010": size and based value split by whitespace.
      if (kind() == TokenKind::number && text().front() == '\'') ++pos_;
      return;
    }
    if (kind() == TokenKind::string) {
      ++pos_;
      return;
    }
    if (at_identifier()) {
      ++pos_;
      if (accept("(")) {
        if (!at(")")) parse_arguments();
        expect(")", "to close call arguments");
      }
      while (at("[")) parse_select();
      return;
    }
    if (accept("(")) {
      parse_expr();
      expect(")", "to close parenthesised expression");
      return;
    }
    if (accept("{")) {
      parse_expr();
      if (accept("{")) {  // replication
        parse_expr();
        while (accept(",")) parse_expr();
        expect("}", "to close replicated concatenation");
      } else {
        while (accept(",")) parse_expr();
      }
      expect("}", "to close concatenation");
      return;
    }
    fail_here("expected expression");
  }

  void parse_arguments() {
    parse_expr();
    while (accept(",")) parse_expr();
  }

  void parse_select() {
    expect("[", "to open select");
    parse_expr();
    if (accept(":") || accept("+:") || accept("-:")) parse_expr();
    expect("]", "to close select");
  }

  void parse_range() {
    expect("[", "to open range");
    parse_expr();
    expect(":", "in range");
    parse_expr();
    expect("]", "to close range");
  }

  std::size_t source_size_;
  std::vector<const Token*> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

bool is_instance_boundary(const std::vector<const Token*>& sig, std::size_t i) {
  if (i == 0) return true;
  const Token* prev = sig[i - 1];
  // begin : label
  if (i >= 3 && prev->kind == TokenKind::identifier && sig[i - 2]->text == ":" && sig[i - 3]->text == "begin") {
    return true;
  }
  const std::string_view t = prev->text;
  if (prev->kind == TokenKind::punctuation) return t == ";" || t == ")";
  if (prev->kind == TokenKind::keyword) {
    return t == "begin" || t == "end" || t == "else" || t == "generate" || t == "endgenerate" ||
           t == "endcase" || t == "endfunction" || t == "endtask";
  }
  return false;
}

// Index just past a balanced group opened at sig[i] (which must be `open`),
// or sig.size() if unbalanced.
std::size_t skip_group(const std::vector<const Token*>& sig, std::size_t i, std::string_view open,
                       std::string_view close) {
  int depth = 0;
  for (; i < sig.size(); ++i) {
    if (sig[i]->kind == TokenKind::punctuation && sig[i]->text == open) ++depth;
    if (sig[i]->kind == TokenKind::punctuation && sig[i]->text == close && --depth == 0) return i + 1;
  }
  return sig.size();
}

bool plain_identifier(const Token* t) {
  return t->kind == TokenKind::identifier && t->text.front() != '$' && t->text.front() != '`';
}

}  // namespace

SyntaxVerdict check_syntax(std::string_view source) {
  const TokenStream tokens = tokenize(source);
  for (const Token& t : tokens) {
    if (t.malformed) {
      return {false, Diagnostic{t.span, "malformed token '" + std::string(t.text.substr(0, 16)) + "'"}};
    }
  }
  try {
    Parser(source, tokens).parse_source();
  } catch (const ParseError& e) {
    return {false, e.diag};
  }
  return {true, std::nullopt};
}

StructureReport analyze_structure(std::string_view source) {
  StructureReport report;
  const TokenStream tokens = tokenize(source);
  std::vector<const Token*> sig;
  for (const Token& t : tokens) {
    if (t.significant()) sig.push_back(&t);
  }

  bool in_module = false;
  std::unordered_set<std::string> seen_instances;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const Token* t = sig[i];
    if (t->kind == TokenKind::keyword && (t->text == "module" || t->text == "macromodule")) {
      ++report.module_count;
      const bool named = i + 1 < sig.size() && sig[i + 1]->kind == TokenKind::identifier;
      report.declared_modules.emplace_back(named ? sig[i + 1]->text : std::string_view{});
      in_module = true;
      continue;
    }
    if (t->kind == TokenKind::keyword && t->text == "endmodule") {
      in_module = false;
      continue;
    }
    if (!in_module || !plain_identifier(t)) continue;
    if (!is_instance_boundary(sig, i)) continue;

    // type [#(...)|#delay] name [range] (
    std::size_t j = i + 1;
    if (j < sig.size() && sig[j]->text == "#") {
      ++j;
      if (j < sig.size() && sig[j]->text == "(") {
        j = skip_group(sig, j, "(", ")");
      } else {
        ++j;
      }
    }
    if (j >= sig.size() || !plain_identifier(sig[j])) continue;
    ++j;
    if (j < sig.size() && sig[j]->text == "[") j = skip_group(sig, j, "[", "]");
    if (j >= sig.size() || sig[j]->kind != TokenKind::punctuation || sig[j]->text != "(") continue;

    std::string type(t->text);
    if (seen_instances.insert(type).second) report.instantiated_modules.push_back(type);
  }

  const std::unordered_set<std::string> declared(report.declared_modules.begin(), report.declared_modules.end());
  for (const std::string& name : report.instantiated_modules) {
    if (!declared.contains(name)) report.undefined_instantiations.push_back(name);
  }

  const SyntaxVerdict verdict = check_syntax(source);
  report.syntax_ok = verdict.ok;
  report.first_error = verdict.first_error;
  return report;
}

}  // namespace itertl::rtl

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/rtl/lexer.hpp"

namespace itertl::rtl {

struct Diagnostic {
  Span span;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct SyntaxVerdict {
  bool ok = false;
  std::optional<Diagnostic> first_error;
};

struct StructureReport {
  bool syntax_ok = false;
  std::size_t module_count = 0;
  std::vector<std::string> declared_modules;        // in order, duplicates kept
  std::vector<std::string> instantiated_modules;    // first-appearance order, unique
  std::vector<std::string> undefined_instantiations;  // subset of instantiated_modules
  std::optional<Diagnostic> first_error;

  bool multi_module() const { return module_count >= 2; }
  bool self_contained() const { return undefined_instantiations.empty(); }

  friend bool operator==(const StructureReport&, const StructureReport&) = default;
};

// Checks the source against the supported Verilog-2005 subset (listed in
// the README). Never throws; a failing verdict always carries the first
// diagnostic.
SyntaxVerdict check_syntax(std::string_view source);

// Token-level structure scan. Works on syntactically broken text as well: the
// module count and the instantiation list never depend on the parse verdict.
StructureReport analyze_structure(std::string_view source);

}  // namespace itertl::rtl

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace itertl {

// One training/evaluation unit: an instruction and its reference code.
struct InstructionRecord {
  std::string id;
  std::string instruction;
  std::string reference;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

}  // namespace itertl

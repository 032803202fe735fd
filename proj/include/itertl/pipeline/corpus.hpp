// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "itertl/records.hpp"

namespace itertl::pipeline {

// Bundled mini-RTL corpus over a small grammar: two-input gates, inverters,
// multiplexers, flip-flops, registers, adders and comparators, plus a handful
// of hierarchical (multi-module) references and two references with syntax
// errors, so the reference filter has something to remove. Deterministic.
std::vector<InstructionRecord> synthetic_corpus();

}  // namespace itertl::pipeline

// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/corpus.hpp"

#include <cstdio>
#include <string>

namespace itertl::pipeline {
namespace {

struct Gate {
  const char* name;
  const char* word;
  const char* expr;
};

std::string two_input(const std::string& name, const std::string& expr) {
  return "module " + name + " (input a, input b, output y);\n  assign y = " + expr + ";\nendmodule\n";
}

std::string adder(int width) {
  const std::string hi = std::to_string(width - 1);
  return "module add" + std::to_string(width) + " (input [" + hi + ":0] a, input [" + hi + ":0] b, output [" +
         std::to_string(width) + ":0] y);\n  assign y = a + b;\nendmodule\n";
}

std::string reg(int width) {
  const std::string hi = std::to_string(width - 1);
  return "module reg" + std::to_string(width) + " (input clk, input [" + hi + ":0] d, output reg [" + hi +
         ":0] q);\n  always @(posedge clk) q <= d;\nendmodule\n";
}

}  // namespace

std::vector<InstructionRecord> synthetic_corpus() {
  std::vector<InstructionRecord> out;
  // Instructions end with the requested module name so that a context-window
  // model sees it right before generation starts.
  const auto add = [&](std::string instruction, std::string reference, const std::string& name) {
    instruction += " Module name: " + name;
    char id[16];
    std::snprintf(id, sizeof id, "mini-%02zu", out.size() + 1);
    out.push_back({id, std::move(instruction), std::move(reference)});
  };

  static constexpr Gate kGates[] = {
      {"and2", "AND", "a & b"},    {"or2", "OR", "a | b"},       {"xor2", "XOR", "a ^ b"},
      {"nand2", "NAND", "~(a & b)"}, {"nor2", "NOR", "~(a | b)"}, {"xnor2", "XNOR", "~(a ^ b)"},
  };
  for (const Gate& g : kGates) {
    add(std::string("Write a module whose output y is the ") + g.word + " of inputs a and b.",
        two_input(g.name, g.expr), g.name);
  }
  add("Write a module whose output y is the inverse of input a.",
      "module inv (input a, output y);\n  assign y = ~a;\nendmodule\n", "inv");
  add("Write a module whose output y follows input a.", "module buf1 (input a, output y);\n  assign y = a;\nendmodule\n",
      "buf1");
  add("Write a module that drives y with b when sel is high and a otherwise.",
      "module mux2 (input a, input b, input sel, output y);\n  assign y = sel ? b : a;\nendmodule\n", "mux2");
  add("Write a module that selects one of inputs a, b, c, d with the two-bit select s.",
      "module mux4 (input a, input b, input c, input d, input [1:0] s, output y);\n"
      "  assign y = s[1] ? (s[0] ? d : c) : (s[0] ? b : a);\nendmodule\n",
      "mux4");
  add("Write a module that stores d on the rising edge of clk.",
      "module dff (input clk, input d, output reg q);\n  always @(posedge clk) q <= d;\nendmodule\n", "dff");
  add("Write a flip-flop module with an active-high synchronous reset rst.",
      "module dffr (input clk, input rst, input d, output reg q);\n"
      "  always @(posedge clk) q <= rst ? 1'b0 : d;\nendmodule\n",
      "dffr");
  for (int w : {2, 4, 8}) {
    add("Write a module that registers the " + std::to_string(w) + "-bit input d on clk.", reg(w),
        "reg" + std::to_string(w));
  }
  for (int w : {2, 4, 8}) {
    add("Write a module that adds two " + std::to_string(w) + "-bit inputs a and b with a carry-out bit.", adder(w),
        "add" + std::to_string(w));
  }
  add("Write a module whose output y is high when the 4-bit inputs a and b are equal.",
      "module eq4 (input [3:0] a, input [3:0] b, output y);\n  assign y = a == b;\nendmodule\n", "eq4");
  add("Write a module whose output y is high when the 4-bit input a is greater than b.",
      "module gt4 (input [3:0] a, input [3:0] b, output y);\n  assign y = a > b;\nendmodule\n", "gt4");
  add("Write a module whose output y is the majority of inputs a, b and c.",
      "module maj3 (input a, input b, input c, output y);\n  assign y = (a & b) | (a & c) | (b & c);\nendmodule\n",
      "maj3");
  add("Write a module that counts up on every rising edge of clk.",
      "module cnt4 (input clk, output reg [3:0] q);\n  always @(posedge clk) q <= q + 1;\nendmodule\n", "cnt4");

  // Hierarchical references that the reference filter must drop.
  add("Write a full adder built from half adders that adds a, b and cin.",
      "module ha (input a, input b, output s, output c);\n  assign s = a ^ b;\n  assign c = a & b;\nendmodule\n"
      "module fa (input a, input b, input cin, output s, output c);\n  wire s1, c1, c2;\n"
      "  ha u0 (a, b, s1, c1);\n  ha u1 (s1, cin, s, c2);\n  assign c = c1 | c2;\nendmodule\n",
      "fa");
  add("Write a four-input multiplexer built from two-input multiplexer instances.",
      "module mux2 (input a, input b, input sel, output y);\n  assign y = sel ? b : a;\nendmodule\n"
      "module mux4h (input a, input b, input c, input d, input [1:0] s, output y);\n  wire lo, hi;\n"
      "  mux2 m0 (a, b, s[0], lo);\n  mux2 m1 (c, d, s[0], hi);\n  mux2 m2 (lo, hi, s[1], y);\nendmodule\n",
      "mux4h");
  add("Write a synchroniser that passes d through two flip-flop stages.",
      "module dff (input clk, input d, output reg q);\n  always @(posedge clk) q <= d;\nendmodule\n"
      "module sync2 (input clk, input d, output q);\n  wire m;\n  dff s0 (clk, d, m);\n  dff s1 (clk, m, q);\nendmodule\n",
      "sync2");
  add("Write a three-input AND built from two-input AND gates.",
      "module and2 (input a, input b, output y);\n  assign y = a & b;\nendmodule\n"
      "module and3 (input a, input b, input c, output y);\n  wire t;\n  and2 g0 (a, b, t);\n  and2 g1 (t, c, y);\nendmodule\n",
      "and3");
  add("Write a three-input XOR built from two-input XOR gates.",
      "module xor2 (input a, input b, output y);\n  assign y = a ^ b;\nendmodule\n"
      "module xor3 (input a, input b, input c, output y);\n  wire t;\n  xor2 g0 (a, b, t);\n  xor2 g1 (t, c, y);\nendmodule\n",
      "xor3");
  add("Write a three-input OR built from two-input OR gates.",
      "module or2 (input a, input b, output y);\n  assign y = a | b;\nendmodule\n"
      "module or3 (input a, input b, input c, output y);\n  wire t;\n  or2 g0 (a, b, t);\n  or2 g1 (t, c, y);\nendmodule\n",
      "or3");

  // References with syntax errors.
  add("Write a module whose output y is a AND NOT b.",
      "module andn (input a, input b, output y)\n  assign y = a & ~b;\nendmodule\n", "andn");
  add("Write a module whose output y is a OR NOT b.",
      "module orn (input a, input b, output y);\n  assign y = a | ~b\nendmodule\n", "orn");
  return out;
}

}  // namespace itertl::pipeline

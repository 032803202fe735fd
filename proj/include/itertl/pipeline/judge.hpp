// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "itertl/records.hpp"

namespace itertl::pipeline {

struct Verdict {
  bool pass = false;
  bool judge_error = false;  // the judge itself failed; counted as a fail
  std::string detail;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual Verdict judge(const InstructionRecord& record, std::string_view code, const std::string& sample_key) = 0;
  virtual std::string name() const = 0;
};

// Passes when the code parses, declares exactly one module and instantiates
// nothing it does not declare.
class BuiltinJudge final : public Judge {
 public:
  Verdict judge(const InstructionRecord& record, std::string_view code, const std::string& sample_key) override;
  std::string name() const override { return "builtin"; }
};

// Runs `<command> <candidate-file> <record-id>` through /bin/sh; exit status
// 0 passes. A command that cannot be started or dies on a signal yields a
// flagged failure. Candidate files are written under `work_dir`.
class CommandJudge final : public Judge {
 public:
  CommandJudge(std::string command, std::filesystem::path work_dir);

  Verdict judge(const InstructionRecord& record, std::string_view code, const std::string& sample_key) override;
  std::string name() const override { return command_; }

  // False when the program named by the first word of the command cannot be
  // found (as a path, or on PATH).
  static bool program_exists(std::string_view command);

 private:
  std::string command_;
  std::filesystem::path work_dir_;
};

std::unique_ptr<Judge> make_judge(const std::string& command, const std::filesystem::path& work_dir);

}  // namespace itertl::pipeline

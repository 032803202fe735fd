// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/judge.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "itertl/io.hpp"
#include "itertl/rtl/analyzer.hpp"

extern char** environ;

namespace itertl::pipeline {

Verdict BuiltinJudge::judge(const InstructionRecord&, std::string_view code, const std::string&) {
  const rtl::StructureReport r = rtl::analyze_structure(code);
  if (!r.syntax_ok) return {false, false, "syntax: " + r.first_error->message};
  if (r.module_count != 1) return {false, false, "declares " + std::to_string(r.module_count) + " modules"};
  if (!r.undefined_instantiations.empty()) return {false, false, "instantiates undefined " + r.undefined_instantiations.front()};
  return {true, false, "ok"};
}

CommandJudge::CommandJudge(std::string command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
  if (command_.empty()) throw std::invalid_argument("CommandJudge: empty command");
}

bool CommandJudge::program_exists(std::string_view command) {
  const auto b = command.find_first_not_of(" \t");
  if (b == std::string_view::npos) return false;
  const auto e = command.find_first_of(" \t", b);
  const std::string program(command.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
  if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  std::string_view dirs = path != nullptr ? path : "/usr/bin:/bin";
  while (!dirs.empty()) {
    const auto colon = dirs.find(':');
    const std::string dir(dirs.substr(0, colon));
    const std::string candidate = (dir.empty() ? std::string(".") : dir) + "/" + program;
    if (::access(candidate.c_str(), X_OK) == 0) return true;
    if (colon == std::string_view::npos) break;
    dirs.remove_prefix(colon + 1);
  }
  return false;
}

Verdict CommandJudge::judge(const InstructionRecord& record, std::string_view code, const std::string& sample_key) {
  std::filesystem::create_directories(work_dir_);
  const std::filesystem::path file = work_dir_ / (sample_key + ".v");
  io::write_file_atomic(file, code);
  const std::string script = command_ + " \"$1\" \"$2\"";
  const std::string file_arg = file.string();
  const char* argv[] = {"/bin/sh", "-c", script.c_str(), "itertl-judge", file_arg.c_str(), record.id.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, "/bin/sh", nullptr, nullptr, const_cast<char* const*>(argv), environ);
  if (rc != 0) return {false, true, std::string("spawn failed: ") + std::strerror(rc)};
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return {false, true, "waitpid failed"};
  }
  if (WIFSIGNALED(status)) return {false, true, "judge killed by signal " + std::to_string(WTERMSIG(status))};
  const int code_rc = WEXITSTATUS(status);
  if (code_rc == 0) return {true, false, "exit 0"};
  // 126/127: the shell could not run the command at all.
  if (code_rc == 126 || code_rc == 127) return {false, true, "judge command not runnable (exit " + std::to_string(code_rc) + ")"};
  return {false, false, "exit " + std::to_string(code_rc)};
}

std::unique_ptr<Judge> make_judge(const std::string& command, const std::filesystem::path& work_dir) {
  if (command.empty()) return std::make_unique<BuiltinJudge>();
  return std::make_unique<CommandJudge>(command, work_dir);
}

}  // namespace itertl::pipeline

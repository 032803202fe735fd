// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/records.hpp"
#include "json.hpp"

namespace itertl::io {

using Json = nlohmann::ordered_json;

// Malformed input file. line() is 1-based, 0 when not line-oriented.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, flushes, then renames over `path`, so
// readers see either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// One JSON value per non-blank line.
std::vector<Json> parse_jsonl(std::string_view text);
std::string to_jsonl(std::span<const Json> rows);

std::vector<InstructionRecord> parse_corpus(std::string_view jsonl);
std::vector<InstructionRecord> read_corpus(const std::filesystem::path& path);
std::string corpus_to_jsonl(std::span<const InstructionRecord> corpus);

}  // namespace itertl::io

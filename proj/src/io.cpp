// SPDX-License-Identifier: Apache-2.0
#include "itertl/io.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace itertl::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw std::runtime_error("error reading " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (f == nullptr) throw std::runtime_error("cannot create " + tmp.string());
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() && std::fflush(f) == 0 &&
                    ::fsync(::fileno(f)) == 0;
    if (std::fclose(f) != 0 || !ok) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::vector<Json> parse_jsonl(std::string_view text) {
  std::vector<Json> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")", line_no);
    }
  }
  return rows;
}

std::string to_jsonl(std::span<const Json> rows) {
  std::string out;
  for (const Json& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

std::vector<InstructionRecord> parse_corpus(std::string_view jsonl) {
  std::vector<InstructionRecord> corpus;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fail = [&](const std::string& why) {
      throw FormatError("line " + std::to_string(line_no) + ": " + why, line_no);
    };
    Json row;
    try {
      row = Json::parse(line);
    } catch (const Json::parse_error&) {
      fail("malformed JSON");
    }
    if (!row.is_object()) fail("expected an object");
    for (const char* key : {"id", "instruction", "reference"}) {
      if (!row.contains(key) || !row[key].is_string()) fail(std::string("missing string field '") + key + "'");
    }
    InstructionRecord r{row["id"].get<std::string>(), row["instruction"].get<std::string>(),
                        row["reference"].get<std::string>()};
    if (!ids.insert(r.id).second) fail("duplicate id '" + r.id + "'");
    corpus.push_back(std::move(r));
  }
  return corpus;
}

std::vector<InstructionRecord> read_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string corpus_to_jsonl(std::span<const InstructionRecord> corpus) {
  std::string out;
  for (const InstructionRecord& r : corpus) {
    out += Json{{"id", r.id}, {"instruction", r.instruction}, {"reference", r.reference}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace itertl::io

// SPDX-License-Identifier: Apache-2.0
#include "itertl/toy/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "itertl/io.hpp"

namespace itertl::toy {
namespace {

constexpr const char* kFormat = "itertl-toy-checkpoint";
constexpr int kVersion = 1;

std::string encode_logits(std::span<const double> logits) {
  std::string bytes(logits.size() * sizeof(double), '\0');
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(logits[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return bytes;
}

std::vector<double> decode_logits(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw std::runtime_error("checkpoint: logits file size is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

io::Json header_json(const ToyModel& model, int iteration, const std::string& logits_name,
                     const std::string& logits_digest) {
  io::Json contexts = io::Json::array();
  for (const Context& c : model.contexts()) contexts.push_back(c);
  return io::Json{{"format", kFormat},
                  {"version", kVersion},
                  {"vocab", model.vocab().tokens()},
                  {"order", model.order()},
                  {"seed", model.seed()},
                  {"iteration", iteration},
                  {"contexts", std::move(contexts)},
                  {"rows", model.row_count()},
                  {"logits_file", logits_name},
                  {"logits_sha256", logits_digest}};
}

std::string logits_name(const std::string& stem) { return stem + ".logits.f64"; }

std::string header_text(const ToyModel& model, int iteration, const std::string& stem, const std::string& logits) {
  return header_json(model, iteration, logits_name(stem), io::sha256_hex(logits)).dump(1) + "\n";
}

}  // namespace

std::string checkpoint_digest(const ToyModel& model, int iteration, const std::string& stem) {
  return io::sha256_hex(header_text(model, iteration, stem, encode_logits(model.logits())));
}

CheckpointInfo save_checkpoint(const ToyModel& model, int iteration, const std::filesystem::path& dir,
                               const std::string& stem) {
  CheckpointInfo info;
  info.iteration = iteration;
  info.header = dir / (stem + ".json");
  info.logits = dir / logits_name(stem);
  const std::string logits = encode_logits(model.logits());
  io::write_file_atomic(info.logits, logits);
  const std::string header = header_text(model, iteration, stem, logits);
  io::write_file_atomic(info.header, header);
  info.digest = io::sha256_hex(header);
  return info;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& header_path) {
  const std::string raw_header = io::read_file(header_path);
  io::Json h;
  try {
    h = io::Json::parse(raw_header);
  } catch (const io::Json::parse_error& e) {
    throw std::runtime_error("checkpoint " + header_path.string() + ": malformed header (" + e.what() + ")");
  }
  const auto need = [&](const char* key) -> const io::Json& {
    if (!h.contains(key)) throw std::runtime_error("checkpoint " + header_path.string() + ": missing '" + key + "'");
    return h[key];
  };
  if (need("format") != kFormat) throw std::runtime_error("checkpoint: unknown format");
  if (need("version") != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  Vocab vocab(need("vocab").get<std::vector<std::string>>());
  const int order = need("order").get<int>();
  const auto seed = need("seed").get<std::uint64_t>();
  const int iteration = need("iteration").get<int>();
  auto contexts = need("contexts").get<std::vector<Context>>();
  if (need("rows").get<std::size_t>() != contexts.size()) throw std::runtime_error("checkpoint: row count mismatch");
  const std::filesystem::path logits_path = header_path.parent_path() / need("logits_file").get<std::string>();
  const std::string logits_bytes = io::read_file(logits_path);
  if (io::sha256_hex(logits_bytes) != need("logits_sha256").get<std::string>()) {
    throw std::runtime_error("checkpoint: logits digest mismatch for " + logits_path.string());
  }
  ToyModel model = ToyModel::from_parts(std::move(vocab), order, seed, std::move(contexts), decode_logits(logits_bytes));
  return {std::move(model), iteration, io::sha256_hex(raw_header)};
}

}  // namespace itertl::toy

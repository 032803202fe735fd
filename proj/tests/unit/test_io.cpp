// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "itertl/io.hpp"
#include "itertl/pipeline/config.hpp"
#include "itertl/pipeline/corpus.hpp"
#include "itertl/toy/checkpoint.hpp"
#include "test_support.hpp"

using namespace itertl;
namespace ts = testing_support;

TEST_CASE("sha256 known vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic write replaces content and leaves no temp files") {
  ts::TempDir dir;
  const auto p = dir / "a.txt";
  io::write_file_atomic(p, "one");
  CHECK(io::read_file(p) == "one");
  io::write_file_atomic(p, "two\n");
  CHECK(io::read_file(p) == "two\n");
  CHECK(io::file_sha256(p) == io::sha256_hex("two\n"));
  int entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(io::write_file_atomic(dir / "missing/sub/b.txt", "x"), std::runtime_error);
  CHECK_THROWS_AS(io::read_file(dir / "nope"), std::runtime_error);
}

TEST_CASE("jsonl parsing names the failing line") {
  const auto rows = io::parse_jsonl("{\"a\":1}\n\n  \n{\"a\":2}\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1]["a"] == 2);
  CHECK(io::to_jsonl(rows) == "{\"a\":1}\n{\"a\":2}\n");
  try {
    io::parse_jsonl("{\"a\":1}\n{oops\n");
    FAIL("expected FormatError");
  } catch (const io::FormatError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).starts_with("line 2:"));
  }
}

TEST_CASE("corpus parsing and validation") {
  const auto corpus = pipeline::synthetic_corpus();
  CHECK(io::parse_corpus(io::corpus_to_jsonl(corpus)) == corpus);
  CHECK(io::parse_corpus("").empty());

  auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      io::parse_corpus(text);
      FAIL("expected FormatError");
    } catch (const io::FormatError& e) {
      CHECK(e.line() == line);
    }
  };
  expect_line("{\"id\":\"a\",\"instruction\":\"x\",\"reference\":\"y\"}\n{\"id\":\"b\",\"instruction\":\"x\"}\n", 2);
  expect_line("{\"id\":\"a\",\"instruction\":\"x\",\"reference\":\"y\"}\n{\"id\":\"a\",\"instruction\":\"x\",\"reference\":\"y\"}\n", 2);
  expect_line("{\"id\":3,\"instruction\":\"x\",\"reference\":\"y\"}\n", 1);
  expect_line("[1,2]\n", 1);
}

TEST_CASE("bundled corpus file matches the generator") {
  const auto on_disk = io::read_corpus(ts::data_dir() / "../../data/mini_rtl.jsonl");
  CHECK(on_disk == pipeline::synthetic_corpus());
  CHECK(on_disk.size() >= 20);
}

TEST_CASE("checkpoint round trip") {
  ts::TempDir dir;
  const auto corpus = pipeline::synthetic_corpus();
  toy::ToyModel m(toy::Vocab::from_corpus(corpus), 2, 42);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& r : corpus) m.ensure_row(m.context_of(m.vocab().encode_prompt(r.instruction)));
  for (double& x : m.mutable_logits()) x = g(rng);
  m.mutable_logits()[0] = -0.0;
  m.mutable_logits()[1] = std::numeric_limits<double>::denorm_min();

  const auto info = toy::save_checkpoint(m, 3, dir.path(), "ckpt_3");
  CHECK(info.header == dir / "ckpt_3.json");
  CHECK(info.logits == dir / "ckpt_3.logits.f64");
  CHECK(info.digest == io::file_sha256(info.header));
  CHECK(info.digest == toy::checkpoint_digest(m, 3, "ckpt_3"));
  CHECK(info.digest != toy::checkpoint_digest(m, 4, "ckpt_3"));
  CHECK(std::filesystem::file_size(info.logits) == m.logits().size() * 8);

  const auto loaded = toy::load_checkpoint(info.header);
  CHECK(loaded.iteration == 3);
  CHECK(loaded.digest == info.digest);
  CHECK(loaded.model.order() == 2);
  CHECK(loaded.model.seed() == 42);
  CHECK(loaded.model.vocab().tokens() == m.vocab().tokens());
  CHECK(loaded.model.contexts() == m.contexts());
  REQUIRE(loaded.model.logits().size() == m.logits().size());
  for (std::size_t i = 0; i < m.logits().size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(loaded.model.logits()[i]) == std::bit_cast<std::uint64_t>(m.logits()[i]));
  }
  // Same state, same bytes.
  const auto again = toy::save_checkpoint(loaded.model, 3, dir / "", "ckpt_3b");
  CHECK(io::read_file(again.logits) == io::read_file(info.logits));
}

TEST_CASE("corrupted checkpoints are rejected") {
  ts::TempDir dir;
  toy::ToyModel m(toy::Vocab({"<bos>", "<eos>", "a"}), 1);
  m.ensure_row(toy::Context{0});
  const auto info = toy::save_checkpoint(m, 1, dir.path(), "c");

  SUBCASE("logits tampered") {
    std::string bytes = io::read_file(info.logits);
    bytes[3] ^= 0x10;
    io::write_file_atomic(info.logits, bytes);
    CHECK_THROWS_WITH_AS(toy::load_checkpoint(info.header), doctest::Contains("digest mismatch"), std::runtime_error);
  }
  SUBCASE("header tampered") {
    std::string header = io::read_file(info.header);
    header.replace(header.find("itertl-toy-checkpoint"), 6, "foobar");
    io::write_file_atomic(info.header, header);
    CHECK_THROWS_AS(toy::load_checkpoint(info.header), std::runtime_error);
  }
  SUBCASE("header not json") {
    io::write_file_atomic(info.header, "{");
    CHECK_THROWS_AS(toy::load_checkpoint(info.header), std::runtime_error);
  }
  SUBCASE("logits missing") {
    std::filesystem::remove(info.logits);
    CHECK_THROWS_AS(toy::load_checkpoint(info.header), std::runtime_error);
  }
}

TEST_CASE("config defaults mirror the iteration defaults") {
  const pipeline::RunConfig cfg = pipeline::parse_config("");
  CHECK(cfg.iteration.K == 4);
  CHECK(cfg.iteration.T == 3);
  CHECK(pipeline::IterationConfig::kMaxIterations == 7);
  CHECK(cfg.iteration.ranking.alpha == 0.3);
  CHECK(cfg.iteration.ranking.beta == 0.2);
  CHECK(cfg.iteration.ranking.lambda == 1.0);
  CHECK(cfg.iteration.train_decoding.temperature == 0.5);
  CHECK(cfg.iteration.train_decoding.top_p == 0.95);
  REQUIRE(cfg.iteration.eval_decoding.size() == 4);
  CHECK(cfg.iteration.eval_decoding[0].temperature == 0.0);
  CHECK(cfg.iteration.eval_decoding[3].temperature == 0.8);
  CHECK(cfg.trainer.epoch_cap == 50);
  CHECK(cfg.trainer.window == 3);
  CHECK(cfg.trainer.tolerance == 1e-3);
  CHECK(cfg.iteration.filter.enabled);
  CHECK(cfg.iteration.filter.penalty_value == -1.0);
  CHECK_FALSE(cfg.early_stop);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config parsing") {
  const pipeline::RunConfig cfg = pipeline::parse_config(
      "# comment\n"
      "seed = 17\n"
      "k=5   # trailing comment\n"
      "iterations = 2\n"
      "lambda = 0.5\n"
      "eval_temperatures = 0, 0.7\n"
      "eval_k = 1,3\n"
      "filter = off\n"
      "early_stop_threshold = inf\n"
      "corpus = data/x.jsonl\n"
      "output_dir = /abs/run\n",
      "/base");
  CHECK(cfg.iteration.seed == 17);
  CHECK(cfg.iteration.K == 5);
  CHECK(cfg.iteration.T == 2);
  CHECK(cfg.iteration.ranking.lambda == 0.5);
  REQUIRE(cfg.iteration.eval_decoding.size() == 2);
  CHECK(cfg.iteration.eval_decoding[1].temperature == 0.7);
  CHECK(cfg.eval_k == std::vector<int>{1, 3});
  CHECK_FALSE(cfg.iteration.filter.enabled);
  CHECK(std::isinf(cfg.early_stop_threshold));
  CHECK(cfg.corpus == std::filesystem::path("/base/data/x.jsonl"));
  CHECK(cfg.output_dir == std::filesystem::path("/abs/run"));
  CHECK(cfg.trainer_config().seed == 17);
  CHECK(cfg.trainer_config().ranking.lambda == 0.5);
}

TEST_CASE("config errors name the line and key") {
  CHECK_THROWS_WITH_AS(pipeline::parse_config("seed = 1\nbogus = 3\n"), doctest::Contains("config line 2"),
                       pipeline::ConfigError);
  CHECK_THROWS_WITH_AS(pipeline::parse_config("bogus = 3\n"), doctest::Contains("unknown config key 'bogus'"),
                       pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::parse_config("k = four\n"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::parse_config("alpha = 1x\n"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::parse_config("filter = maybe\n"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::parse_config("just text\n"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::load_config("/nonexistent/itertl.conf"), pipeline::ConfigError);
}

TEST_CASE("config validation") {
  auto invalid = [](const std::string& text) {
    CHECK_THROWS_AS(pipeline::parse_config(text).validate(), pipeline::ConfigError);
  };
  invalid("k = 1");
  invalid("iterations = 0");
  invalid("iterations = 8");
  invalid("alpha = -1");
  invalid("penalty = 0");
  invalid("train_top_p = 0");
  invalid("eval_k = 11");
  invalid("model_order = 0");
  invalid("backend_url = ftp://x");
  invalid("workers = -1");
  CHECK_NOTHROW(pipeline::parse_config("iterations = 7\nbackend_url = http://localhost:1").validate());
}

TEST_CASE("environment interpolation") {
  setenv("ITERTL_TEST_SEED", "123", 1);
  setenv("ITERTL_TEST_EMPTY", "", 1);
  unsetenv("ITERTL_TEST_UNSET");
  CHECK(pipeline::expand_env("a${ITERTL_TEST_SEED}b") == "a123b");
  CHECK(pipeline::expand_env("${ITERTL_TEST_UNSET:-fallback}") == "fallback");
  CHECK(pipeline::expand_env("${ITERTL_TEST_EMPTY:-fb}") == "fb");
  CHECK(pipeline::expand_env("${ITERTL_TEST_EMPTY}") == "");
  CHECK(pipeline::expand_env("no vars") == "no vars");
  CHECK_THROWS_AS(pipeline::expand_env("${ITERTL_TEST_UNSET}"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::expand_env("${ITERTL_TEST_SEED"), pipeline::ConfigError);
  CHECK_THROWS_AS(pipeline::expand_env("${}"), pipeline::ConfigError);

  const auto cfg = pipeline::parse_config("seed = ${ITERTL_TEST_SEED}\nworkers = ${ITERTL_TEST_UNSET:-2}\n");
  CHECK(cfg.iteration.seed == 123);
  CHECK(cfg.workers == 2);
  CHECK_THROWS_WITH_AS(pipeline::parse_config("\nseed = ${ITERTL_TEST_UNSET}\n"), doctest::Contains("config line 2"),
                       pipeline::ConfigError);
}

TEST_CASE("config key listing is sorted and complete") {
  const auto keys = pipeline::config_keys();
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  for (const char* k : {"seed", "k", "iterations", "alpha", "beta", "lambda", "judge_cmd", "backend_url", "workers"}) {
    CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
  }
  for (const auto& k : keys) {
    pipeline::RunConfig cfg;
    CHECK_THROWS_AS(pipeline::apply_setting(cfg, k + "_x", "1"), pipeline::ConfigError);
  }
}

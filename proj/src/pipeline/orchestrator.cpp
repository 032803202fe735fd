// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <set>

#include "itertl/pipeline/curves.hpp"
#include "itertl/pipeline/parallel.hpp"
#include "itertl/toy/checkpoint.hpp"

namespace itertl::pipeline {
namespace fs = std::filesystem;

std::string_view origin_name(Origin origin) { return origin == Origin::sampled ? "sampled" : "reference"; }

io::Json ScoredResponse::to_json() const {
  io::Json row{{"record_id", record_id},
               {"origin", origin_name(origin)},
               {"code", code},
               {"score", score.value},
               {"score_basis", scoring::basis_name(score.basis)},
               {"iteration", iteration},
               {"model_digest", model_digest}};
  if (token_logprobs) row["token_logprobs"] = *token_logprobs;
  return row;
}

ScoredResponse ScoredResponse::from_json(const io::Json& row) {
  ScoredResponse r;
  r.record_id = row.at("record_id").get<std::string>();
  const std::string origin = row.at("origin").get<std::string>();
  if (origin == "sampled") {
    r.origin = Origin::sampled;
  } else if (origin == "reference") {
    r.origin = Origin::reference;
  } else {
    throw std::invalid_argument("unknown origin '" + origin + "'");
  }
  r.code = row.at("code").get<std::string>();
  r.score.value = row.at("score").get<double>();
  r.score.basis = scoring::parse_basis(row.at("score_basis").get<std::string>());
  r.iteration = row.at("iteration").get<int>();
  r.model_digest = row.at("model_digest").get<std::string>();
  if (row.contains("token_logprobs")) r.token_logprobs = row["token_logprobs"].get<std::vector<double>>();
  return r;
}

std::vector<ScoredResponse> read_scored(const fs::path& path) {
  std::vector<ScoredResponse> rows;
  std::size_t line = 0;
  for (const io::Json& j : io::parse_jsonl(io::read_file(path))) {
    ++line;
    try {
      rows.push_back(ScoredResponse::from_json(j));
    } catch (const std::exception& e) {
      throw io::FormatError(path.string() + ": row " + std::to_string(line) + ": " + e.what(), line);
    }
  }
  return rows;
}

std::vector<toy::TrainingGroup> training_groups(std::span<const ScoredResponse> rows,
                                                std::span<const InstructionRecord> corpus, const toy::Vocab& vocab,
                                                int K) {
  std::map<std::string, const InstructionRecord*> by_id;
  for (const auto& r : corpus) by_id[r.id] = &r;
  std::map<std::pair<std::string, int>, std::vector<const ScoredResponse*>> buckets;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& row : rows) {
    auto key = std::make_pair(row.record_id, row.iteration);
    auto& bucket = buckets[key];
    if (bucket.empty()) order.push_back(key);
    bucket.push_back(&row);
  }
  std::vector<toy::TrainingGroup> groups;
  for (const auto& key : order) {
    const auto& bucket = buckets[key];
    const auto rec = by_id.find(key.first);
    if (rec == by_id.end()) throw std::invalid_argument("scored row for unknown record '" + key.first + "'");
    if (bucket.size() != static_cast<std::size_t>(K)) {
      throw std::invalid_argument("record '" + key.first + "' has " + std::to_string(bucket.size()) + " rows, expected " +
                                  std::to_string(K));
    }
    toy::TrainingGroup g;
    g.prompt = vocab.encode_prompt(rec->second->instruction);
    const ScoredResponse* reference = nullptr;
    for (const ScoredResponse* r : bucket) {
      if (r->origin == Origin::reference) {
        if (reference != nullptr) throw std::invalid_argument("record '" + key.first + "' has two reference rows");
        reference = r;
        continue;
      }
      std::vector<toy::TokenId> ids = vocab.encode_code(r->code);
      ids.push_back(vocab.eos());
      g.responses.push_back(std::move(ids));
      g.scores.push_back(r->score.value);
    }
    if (reference == nullptr) throw std::invalid_argument("record '" + key.first + "' has no reference row");
    std::vector<toy::TokenId> ids = vocab.encode_code(reference->code);
    ids.push_back(vocab.eos());
    g.responses.push_back(std::move(ids));
    g.scores.push_back(reference->score.value);
    g.reference_index = g.responses.size() - 1;
    groups.push_back(std::move(g));
  }
  return groups;
}

namespace {

std::string now_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

io::Json json_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

io::Json config_echo(const RunConfig& cfg) {
  const IterationConfig& it = cfg.iteration;
  io::Json temps = io::Json::array();
  for (const auto& d : it.eval_decoding) temps.push_back(d.temperature);
  const toy::TrainerConfig tc = cfg.trainer_config();
  return {{"seed", it.seed},
          {"k", it.K},
          {"iterations", it.T},
          {"alpha", it.ranking.alpha},
          {"beta", it.ranking.beta},
          {"lambda", it.ranking.lambda},
          {"train_temperature", it.train_decoding.temperature},
          {"train_top_p", it.train_decoding.top_p},
          {"max_tokens", it.train_decoding.max_tokens},
          {"eval_temperatures", temps},
          {"eval_top_p", it.eval_decoding.front().top_p},
          {"eval_k", cfg.eval_k},
          {"eval_samples", cfg.eval_samples},
          {"filter", it.filter.enabled},
          {"strict_self_contained", it.filter.strict_self_contained},
          {"penalty", it.filter.penalty_value},
          {"model_order", cfg.model_order},
          {"step_size", tc.step_size},
          {"batch_size", tc.batch_size},
          {"epoch_cap", tc.epoch_cap},
          {"convergence_window", tc.window},
          {"convergence_tolerance", tc.tolerance},
          {"shuffle", tc.shuffle},
          {"corpus", cfg.corpus.string()},
          {"backend_url", cfg.remote.url},
          {"judge_cmd", cfg.judge_cmd},
          {"early_stop", cfg.early_stop},
          {"early_stop_threshold", json_number(cfg.early_stop_threshold)},
          {"accumulate_samples", cfg.accumulate_samples}};
}

io::Json artifact(const fs::path& run_dir, const fs::path& file) {
  return {{"path", fs::relative(file, run_dir).generic_string()}, {"sha256", io::file_sha256(file)}};
}

std::uint64_t sample_stream(int t, std::size_t record) {
  return (static_cast<std::uint64_t>(t) << 32) | static_cast<std::uint64_t>(record);
}

struct RecordOutcome {
  std::vector<Sample> samples;
  std::vector<scoring::QualityScore> scores;  // per sample
  std::optional<std::vector<double>> reference_logprobs;
};

}  // namespace

RunResult run_loop(std::span<const InstructionRecord> corpus, const RunConfig& cfg, RemoteBackend* remote,
                   const StageObserver& observer) {
  cfg.validate();
  if (cfg.remote_mode() != (remote != nullptr)) throw ConfigError("backend_url and backend instance disagree");
  if (corpus.empty()) throw ConfigError("corpus has no records");
  {
    std::set<std::string> ids;
    for (const auto& r : corpus) {
      if (!ids.insert(r.id).second) throw ConfigError("duplicate record id '" + r.id + "'");
    }
  }
  const IterationConfig& icfg = cfg.iteration;
  scoring::FilterReport filter_report;
  std::vector<InstructionRecord> kept;
  if (icfg.filter.enabled) {
    kept = scoring::filter_corpus(corpus, &filter_report);
  } else {
    kept.assign(corpus.begin(), corpus.end());
    filter_report.kept = kept.size();
  }
  if (kept.empty()) throw ConfigError("no reference survives the filter");

  const auto stage = [&](int t, std::string_view name) {
    if (observer) observer(t, name);
  };
  const fs::path& dir = cfg.output_dir;
  fs::create_directories(dir);
  const fs::path manifest_path = dir / "manifest.json";
  const int workers = cfg.effective_workers();
  const std::size_t K = static_cast<std::size_t>(icfg.K);

  RunResult result;
  result.manifest_path = manifest_path;
  io::Json& manifest = result.manifest;
  manifest = {{"format", "itertl-run-manifest"},
              {"version", 1},
              {"status", "running"},
              {"mode", remote != nullptr ? "remote" : "toy"},
              {"config", config_echo(cfg)},
              {"corpus",
               {{"sha256", io::sha256_hex(io::corpus_to_jsonl(corpus))},
                {"records", corpus.size()},
                {"kept", filter_report.kept},
                {"dropped_multi_module", filter_report.dropped_multi_module},
                {"dropped_reference_syntax", filter_report.dropped_reference_syntax}}},
              {"iterations", io::Json::array()}};
  io::Json timings = io::Json::array();
  const auto write_manifest = [&] {
    io::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    io::write_file_atomic(dir / "timings.json", timings.dump(2) + "\n");
  };

  std::shared_ptr<const toy::ToyModel> model;
  std::vector<std::vector<toy::TokenId>> reference_ids;
  std::vector<std::vector<toy::TokenId>> prompts;
  IterationState state;
  if (remote == nullptr) {
    auto initial = std::make_shared<toy::ToyModel>(toy::Vocab::from_corpus(kept), cfg.model_order, icfg.seed);
    for (const auto& r : kept) {
      std::vector<toy::TokenId> ids = initial->vocab().encode_code(r.reference);
      ids.push_back(initial->vocab().eos());
      reference_ids.push_back(std::move(ids));
      prompts.push_back(initial->vocab().encode_prompt(r.instruction));
    }
    state.checkpoint_digest = toy::checkpoint_digest(*initial, 0, "ckpt_0");
    model = std::move(initial);
  } else {
    state.checkpoint_digest = remote->checkpoint_digest();
  }
  manifest["initial_checkpoint"] = {{"digest", state.checkpoint_digest}};

  // References are generated once; their quality scores never change.
  std::vector<scoring::QualityScore> reference_scores;
  for (const auto& r : kept) reference_scores.push_back(scoring::score_response(r.reference, r.reference, icfg.filter));

  write_manifest();
  std::vector<toy::TrainingGroup> accumulated;
  for (int t = 0; t < icfg.T; ++t) {
    state.t = t;
    state.started = now_utc();
    std::optional<ToyBackend> toy_backend;
    if (model) toy_backend.emplace(model, state.checkpoint_digest, icfg.seed);
    GenerationBackend& backend = model ? static_cast<GenerationBackend&>(*toy_backend) : *remote;

    stage(t, "sample");
    std::vector<RecordOutcome> outcomes(kept.size());
    parallel_for(kept.size(), workers, [&](std::size_t i) {
      outcomes[i].samples = backend.generate(kept[i], icfg.train_decoding, icfg.K - 1, sample_stream(t, i));
      if (outcomes[i].samples.size() != K - 1) throw BackendError("backend returned the wrong number of samples");
    });

    stage(t, "score");
    parallel_for(kept.size(), workers, [&](std::size_t i) {
      RecordOutcome& o = outcomes[i];
      bool have_logprobs = true;
      for (const Sample& s : o.samples) {
        o.scores.push_back(scoring::score_response(s.code, kept[i].reference, icfg.filter));
        have_logprobs = have_logprobs && s.token_logprobs.has_value();
      }
      if (have_logprobs) o.reference_logprobs = backend.score(kept[i], kept[i].reference);
    });

    stage(t, "persist");
    std::vector<io::Json> rows;
    bool export_only = false;
    double data_loss = 0.0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const RecordOutcome& o = outcomes[i];
      std::vector<loss::ResponseLogProbs> group;
      std::vector<double> z;
      for (std::size_t s = 0; s < o.samples.size(); ++s) {
        ScoredResponse row{kept[i].id, Origin::sampled, o.samples[s].code, o.scores[s], o.samples[s].token_logprobs,
                           t, state.checkpoint_digest};
        rows.push_back(row.to_json());
        if (o.samples[s].token_logprobs) group.push_back({*o.samples[s].token_logprobs});
        z.push_back(o.scores[s].value);
      }
      ScoredResponse ref{kept[i].id, Origin::reference, kept[i].reference, reference_scores[i], o.reference_logprobs,
                         t, state.checkpoint_digest};
      rows.push_back(ref.to_json());
      if (!o.reference_logprobs) {
        export_only = true;
        continue;
      }
      group.push_back({*o.reference_logprobs});
      z.push_back(reference_scores[i].value);
      data_loss += loss::total_loss(group, z, group.size() - 1, icfg.ranking).total;
    }
    state.dataset_path = dir / ("scored_" + std::to_string(t) + ".jsonl");
    io::write_file_atomic(state.dataset_path, io::to_jsonl(rows));

    io::Json entry{{"t", t},
                   {"input_checkpoint", {{"digest", state.checkpoint_digest}}},
                   {"scored", artifact(dir, state.dataset_path)},
                   {"rows", rows.size()}};
    if (!state.model_checkpoint.empty()) entry["input_checkpoint"]["path"] = fs::relative(state.model_checkpoint, dir).generic_string();
    entry["data_loss"] = export_only ? io::Json(nullptr) : io::Json(data_loss / static_cast<double>(kept.size()));

    IterationState next;
    next.t = t + 1;
    if (model) {
      stage(t, "train");
      std::vector<toy::TrainingGroup> groups;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        toy::TrainingGroup g;
        g.prompt = prompts[i];
        for (std::size_t s = 0; s < outcomes[i].samples.size(); ++s) {
          g.responses.push_back(outcomes[i].samples[s].tokens);
          g.scores.push_back(outcomes[i].scores[s].value);
        }
        g.responses.push_back(reference_ids[i]);
        g.scores.push_back(reference_scores[i].value);
        g.reference_index = g.responses.size() - 1;
        groups.push_back(std::move(g));
      }
      std::vector<toy::TrainingGroup> dataset;
      if (cfg.accumulate_samples) {
        accumulated.insert(accumulated.end(), groups.begin(), groups.end());
        dataset = accumulated;
      } else {
        dataset = std::move(groups);
      }
      auto trained = std::make_shared<toy::ToyModel>(*model);
      toy::TrainerConfig tc = cfg.trainer_config();
      tc.seed = toy::Rng::derive(icfg.seed, 0x7472u, static_cast<std::uint64_t>(t)).next();
      toy::Trainer trainer(*trained, tc);
      const toy::TrainingTrace trace = trainer.train_to_convergence(dataset);
      state.loss_trace_path = dir / ("trace_" + std::to_string(t) + ".csv");
      io::write_file_atomic(state.loss_trace_path, trace_csv(trace));
      state.converged_loss = trace.converged_loss();

      stage(t, "checkpoint");
      const toy::CheckpointInfo info = toy::save_checkpoint(*trained, t + 1, dir, "ckpt_" + std::to_string(t + 1));
      next.checkpoint_digest = info.digest;
      next.model_checkpoint = info.header;
      entry["trace"] = artifact(dir, state.loss_trace_path);
      entry["checkpoint"] = artifact(dir, info.header);
      entry["checkpoint"]["logits"] = artifact(dir, info.logits);
      entry["converged_loss"] = *state.converged_loss;
      entry["epochs"] = trace.epochs.size();
      entry["converged"] = trace.converged;
      model = std::move(trained);
    } else {
      stage(t, "checkpoint");
      next.checkpoint_digest = remote->wait_for_new_checkpoint(state.checkpoint_digest);
      entry["trace"] = nullptr;
      entry["checkpoint"] = {{"digest", next.checkpoint_digest}};
      entry["converged_loss"] = nullptr;
    }
    state.finished = now_utc();

    stage(t, "manifest");
    manifest["iterations"].push_back(std::move(entry));
    timings.push_back({{"t", t}, {"started", state.started}, {"finished", state.finished}});
    write_manifest();
    result.states.push_back(state);
    const std::optional<double> previous = t > 0 ? result.states[static_cast<std::size_t>(t - 1)].converged_loss : std::nullopt;
    const std::optional<double> current = state.converged_loss;
    state = next;

    if (cfg.early_stop && previous && current && std::isfinite(cfg.early_stop_threshold) && t + 1 < icfg.T) {
      const double rel = (*previous - *current) / std::max(std::abs(*previous), 1e-300);
      if (rel < cfg.early_stop_threshold) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.states.push_back(state);

  if (model) {
    const fs::path curve = export_curves(manifest, dir, dir / "loss_curve.csv");
    manifest["loss_curve"] = artifact(dir, curve);
    manifest["final_checkpoint"] = fs::relative(state.model_checkpoint, dir).generic_string();
  }
  manifest["final_digest"] = state.checkpoint_digest;
  manifest["stopped_early"] = result.stopped_early;
  manifest["status"] = "complete";
  write_manifest();
  result.final_model = model;
  return result;
}

}  // namespace itertl::pipeline

// SPDX-License-Identifier: Apache-2.0
#include "itertl/cli.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "itertl/io.hpp"
#include "itertl/loss.hpp"
#include "itertl/pipeline/backend.hpp"
#include "itertl/pipeline/config.hpp"
#include "itertl/pipeline/corpus.hpp"
#include "itertl/pipeline/curves.hpp"
#include "itertl/pipeline/evaluate.hpp"
#include "itertl/pipeline/judge.hpp"
#include "itertl/pipeline/orchestrator.hpp"
#include "itertl/rtl/analyzer.hpp"
#include "itertl/scoring.hpp"
#include "itertl/toy/checkpoint.hpp"

namespace itertl::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;
using pipeline::ConfigError;

// Input the user has to fix; exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Format {
  std::string value = "json";
  bool text() const { return value == "text"; }
};

void add_format(CLI::App* cmd, Format& f) {
  cmd->add_option("--format", f.value, "Output format on stdout")->check(CLI::IsMember({"json", "text"}));
}

std::string read_input(const fs::path& path) {
  try {
    return io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Json report_json(const rtl::StructureReport& r, std::string_view source) {
  Json j{{"syntax_ok", r.syntax_ok},
         {"module_count", r.module_count},
         {"declared_modules", r.declared_modules},
         {"instantiated_modules", r.instantiated_modules},
         {"undefined_instantiations", r.undefined_instantiations},
         {"self_contained", r.self_contained()}};
  if (r.first_error) {
    const auto [line, col] = line_col(source, r.first_error->span.begin);
    j["first_error"] = {{"message", r.first_error->message},
                        {"begin", r.first_error->span.begin},
                        {"end", r.first_error->span.end},
                        {"line", line},
                        {"column", col}};
  } else {
    j["first_error"] = nullptr;
  }
  return j;
}

// --- shared run flags ---------------------------------------------------------

struct RunFlags {
  std::string config;
  std::map<std::string, std::string> settings;  // config key -> value from flags
  bool strict_self_contained = false;
  bool no_filter = false;
  std::vector<CLI::Option*> options;
};

void add_setting_flag(CLI::App* cmd, RunFlags& f, const std::string& flag, const std::string& key,
                      const std::string& help) {
  cmd->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.settings[key] = v; }, help);
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool train) {
  cmd->add_option("--config", f.config, "Run config file (falls back to $ITERTL_CONFIG)");
  add_setting_flag(cmd, f, "--seed", "seed", "Random seed (overrides the config)");
  add_setting_flag(cmd, f, "--workers", "workers", "Worker threads (0: logical cores)");
  add_setting_flag(cmd, f, "--backend-url", "backend_url", "Remote generation backend base URL");
  add_setting_flag(cmd, f, "--judge-cmd", "judge_cmd", "External judge command");
  add_setting_flag(cmd, f, "--output-dir", "output_dir", "Run directory");
  add_setting_flag(cmd, f, "--corpus", "corpus", "Instruction corpus JSONL (default: bundled corpus)");
  add_setting_flag(cmd, f, "--iterations", "iterations", "Number of iterations T");
  if (train) {
    add_setting_flag(cmd, f, "--lambda", "lambda", "Ranking-loss weight");
    add_setting_flag(cmd, f, "--alpha", "alpha", "Ranking margin");
    add_setting_flag(cmd, f, "--beta", "beta", "Minimum score gap");
    add_setting_flag(cmd, f, "--k", "k", "Responses per instruction K");
  }
  cmd->add_flag("--strict-self-contained", f.strict_self_contained,
                "Also penalise samples that instantiate undeclared modules");
  cmd->add_flag("--no-filter", f.no_filter, "Disable the multi-module / syntax data filter");
}

pipeline::RunConfig resolve_config(const RunFlags& f) {
  pipeline::RunConfig cfg;
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("ITERTL_CONFIG"); env != nullptr && *env != '\0') path = env;
  }
  if (!path.empty()) cfg = pipeline::load_config(path);
  for (const auto& [key, value] : f.settings) pipeline::apply_setting(cfg, key, value);
  if (f.strict_self_contained) cfg.iteration.filter.strict_self_contained = true;
  if (f.no_filter) cfg.iteration.filter.enabled = false;
  cfg.validate();
  return cfg;
}

std::vector<InstructionRecord> load_corpus(const fs::path& path) {
  if (path.empty()) return pipeline::synthetic_corpus();
  return io::parse_corpus(read_input(path));
}

// ITERTL_FAULT_INJECT=<t>:<stage> terminates the process abruptly when the
// loop reaches that stage, for crash-safety testing.
pipeline::StageObserver make_observer(std::ostream& err) {
  std::optional<std::pair<int, std::string>> fault;
  if (const char* spec = std::getenv("ITERTL_FAULT_INJECT"); spec != nullptr && *spec != '\0') {
    const std::string s(spec);
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("ITERTL_FAULT_INJECT must look like <iteration>:<stage>");
    fault.emplace(std::atoi(s.substr(0, colon).c_str()), s.substr(colon + 1));
  }
  return [fault, &err](int t, std::string_view stage) {
    err << "[itertl] iteration " << t << ": " << stage << std::endl;
    if (fault && fault->first == t && fault->second == stage) {
      err << "[itertl] fault injected at iteration " << t << " stage " << stage << std::endl;
      std::_Exit(86);
    }
  };
}

// --- subcommands --------------------------------------------------------------

int cmd_analyze(const std::string& path, const Format& fmt, std::ostream& out) {
  const std::string source = read_input(path);
  const rtl::StructureReport r = rtl::analyze_structure(source);
  if (fmt.text()) {
    out << path << ": " << (r.syntax_ok ? "syntax ok" : "syntax error") << ", " << r.module_count << " module(s)";
    if (!r.undefined_instantiations.empty()) out << ", undefined instantiations:";
    for (const auto& m : r.undefined_instantiations) out << ' ' << m;
    out << '\n';
    if (r.first_error) {
      const auto [line, col] = line_col(source, r.first_error->span.begin);
      out << path << ':' << line << ':' << col << ": " << r.first_error->message << '\n';
    }
  } else {
    out << report_json(r, source).dump(2) << '\n';
  }
  return r.syntax_ok ? kExitOk : kExitCheckFailed;
}

int cmd_filter(const std::string& in, const std::string& out_path, const Format& fmt, std::ostream& out) {
  const auto corpus = io::parse_corpus(read_input(in));
  scoring::FilterReport report;
  const auto kept = scoring::filter_corpus(corpus, &report);
  io::write_file_atomic(out_path, io::corpus_to_jsonl(kept));
  if (fmt.text()) {
    out << "kept " << report.kept << ", dropped " << report.dropped_multi_module << " multi-module, "
        << report.dropped_reference_syntax << " with syntax errors\n";
  } else {
    out << Json{{"kept", report.kept},
                {"dropped_multi_module", report.dropped_multi_module},
                {"dropped_reference_syntax", report.dropped_reference_syntax}}
               .dump(2)
        << '\n';
  }
  return kExitOk;
}

int cmd_score(const std::string& reference_path, const std::vector<std::string>& candidates, bool strict,
              bool no_filter, const Format& fmt, std::ostream& out) {
  const std::string reference = read_input(reference_path);
  scoring::FilterPolicy policy;
  policy.strict_self_contained = strict;
  policy.enabled = !no_filter;
  Json rows = Json::array();
  for (const std::string& path : candidates) {
    const scoring::QualityScore s = scoring::score_response(read_input(path), reference, policy);
    rows.push_back({{"file", path}, {"score", s.value}, {"score_basis", scoring::basis_name(s.basis)}});
  }
  if (fmt.text()) {
    for (const auto& r : rows) {
      out << r["file"].get<std::string>() << '\t' << pipeline::format_double(r["score"].get<double>()) << '\t'
          << r["score_basis"].get<std::string>() << '\n';
    }
  } else {
    out << rows.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_loss(const std::string& path, const std::map<std::string, std::string>& overrides, bool gradients,
             const Format& fmt, std::ostream& out) {
  Json in;
  try {
    in = Json::parse(read_input(path));
  } catch (const Json::parse_error& e) {
    throw UsageError(path + ": malformed JSON (" + e.what() + ")");
  }
  loss::RankingConfig cfg;
  std::vector<loss::ResponseLogProbs> group;
  std::vector<double> z;
  std::size_t ref = 0;
  try {
    for (const auto& r : in.at("responses")) group.push_back({r.at("token_logprobs").get<std::vector<double>>()});
    z = in.at("scores").get<std::vector<double>>();
    ref = in.at("reference_index").get<std::size_t>();
    if (in.contains("alpha")) cfg.alpha = in["alpha"].get<double>();
    if (in.contains("beta")) cfg.beta = in["beta"].get<double>();
    if (in.contains("lambda")) cfg.lambda = in["lambda"].get<double>();
  } catch (const Json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  for (const auto& [key, value] : overrides) {
    pipeline::RunConfig tmp;
    tmp.iteration.ranking = cfg;
    pipeline::apply_setting(tmp, key, value);
    cfg = tmp.iteration.ranking;
  }
  const loss::LossBreakdown b = loss::total_loss(group, z, ref, cfg);
  std::vector<double> p;
  for (const auto& r : group) p.push_back(loss::normalized_logprob(r));
  const loss::RankingResult rr = loss::ranking_loss(p, z, cfg);
  if (fmt.text()) {
    out << "l_ce " << pipeline::format_double(b.l_ce) << "\nl_ranking " << pipeline::format_double(b.l_ranking)
        << "\ntotal " << pipeline::format_double(b.total) << "\nactive_pairs " << b.active_pairs << '\n';
    return kExitOk;
  }
  Json pairs = Json::array();
  for (const auto& pr : rr.pairs) pairs.push_back({{"lower", pr.lower}, {"higher", pr.higher}, {"hinge", pr.hinge}});
  Json j{{"l_ce", b.l_ce},       {"l_ranking", b.l_ranking}, {"total", b.total},
         {"active_pairs", b.active_pairs}, {"normalized_logprobs", p}, {"pairs", pairs}};
  if (gradients) j["gradients"] = loss::loss_gradients(group, z, ref, cfg);
  out << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_train(const RunFlags& flags, const Format& fmt, std::ostream& out, std::ostream& err) {
  const pipeline::RunConfig cfg = resolve_config(flags);
  const auto corpus = load_corpus(cfg.corpus);
  const pipeline::StageObserver observer = make_observer(err);
  std::unique_ptr<pipeline::RemoteBackend> remote;
  if (cfg.remote_mode()) remote = std::make_unique<pipeline::RemoteBackend>(cfg.remote);
  const pipeline::RunResult result = pipeline::run_loop(corpus, cfg, remote.get(), observer);
  Json losses = Json::array();
  for (const auto& it : result.manifest["iterations"]) losses.push_back(it["converged_loss"]);
  if (fmt.text()) {
    out << result.manifest_path.string() << '\n';
  } else {
    out << Json{{"manifest", result.manifest_path.string()},
                {"iterations", result.manifest["iterations"].size()},
                {"converged_loss", losses},
                {"stopped_early", result.stopped_early}}
               .dump(2)
        << '\n';
  }
  return kExitOk;
}

int cmd_eval(const RunFlags& flags, const std::string& model_path, const std::vector<int>& ks,
             const std::string& out_dir, const Format& fmt, std::ostream& out, std::ostream& err) {
  pipeline::RunConfig cfg = resolve_config(flags);
  if (!ks.empty()) {
    cfg.eval_k = ks;
    cfg.validate();
  }
  if (!cfg.judge_cmd.empty() && !pipeline::CommandJudge::program_exists(cfg.judge_cmd)) {
    throw UsageError("judge command not found: " + cfg.judge_cmd);
  }
  // Default eval problems: instructions whose reference is a valid single
  // module, independent of whether the training run filtered its data.
  const auto corpus = cfg.eval_corpus.empty() ? scoring::filter_corpus(load_corpus(cfg.corpus))
                                              : load_corpus(cfg.eval_corpus);
  if (corpus.empty()) throw UsageError("eval corpus is empty");

  const fs::path dir = out_dir.empty() ? cfg.output_dir : fs::path(out_dir);
  std::unique_ptr<pipeline::GenerationBackend> backend;
  if (cfg.remote_mode()) {
    backend = std::make_unique<pipeline::RemoteBackend>(cfg.remote);
  } else {
    fs::path ckpt = model_path;
    if (ckpt.empty()) {
      const fs::path manifest_path = cfg.output_dir / "manifest.json";
      Json manifest;
      try {
        manifest = Json::parse(read_input(manifest_path));
      } catch (const Json::parse_error&) {
        throw UsageError(manifest_path.string() + ": malformed manifest");
      }
      if (!manifest.contains("final_checkpoint")) {
        throw UsageError(manifest_path.string() + ": run is not complete (no final checkpoint); pass --model");
      }
      ckpt = cfg.output_dir / manifest["final_checkpoint"].get<std::string>();
    }
    if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt.string());
    toy::LoadedCheckpoint loaded = toy::load_checkpoint(ckpt);
    auto model = std::make_shared<const toy::ToyModel>(std::move(loaded.model));
    backend = std::make_unique<pipeline::ToyBackend>(model, loaded.digest, cfg.iteration.seed);
  }
  fs::create_directories(dir);
  auto judge = pipeline::make_judge(cfg.judge_cmd, dir / "judge_work");
  pipeline::EvalConfig ecfg;
  ecfg.decoding = cfg.iteration.eval_decoding;
  ecfg.ks = cfg.eval_k;
  ecfg.n = cfg.eval_samples;
  ecfg.seed = cfg.iteration.seed;
  ecfg.workers = cfg.effective_workers();
  ecfg.max_tokens = cfg.iteration.train_decoding.max_tokens;
  const pipeline::EvalReport report = pipeline::evaluate(*backend, corpus, *judge, ecfg);
  io::write_file_atomic(dir / "eval_report.json", report.to_json().dump(2) + "\n");
  io::write_file_atomic(dir / "eval_verdicts.jsonl", report.verdicts_jsonl());
  err << report.to_text();
  if (fmt.text()) {
    out << report.to_text();
  } else {
    out << report.to_json().dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_curves(const std::string& manifest_path, const std::string& out_path, const Format& fmt, std::ostream& out) {
  Json manifest;
  try {
    manifest = Json::parse(read_input(manifest_path));
  } catch (const Json::parse_error&) {
    throw UsageError(manifest_path + ": malformed manifest");
  }
  const fs::path run_dir = fs::path(manifest_path).parent_path();
  const fs::path target = out_path.empty() ? run_dir / "loss_curve.csv" : fs::path(out_path);
  const fs::path written = pipeline::export_curves(manifest, run_dir, target);
  if (fmt.text()) {
    out << written.string() << '\n';
  } else {
    out << Json{{"loss_curve", written.string()}}.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_corpus(const std::string& out_path, std::ostream& out) {
  const std::string jsonl = io::corpus_to_jsonl(pipeline::synthetic_corpus());
  if (out_path.empty()) {
    out << jsonl;
  } else {
    io::write_file_atomic(out_path, jsonl);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative ranking-loss training pipeline for Verilog code generation", "itertl"};
  app.require_subcommand(1);

  Format fmt;
  std::string path_a, path_b;
  std::vector<std::string> paths;
  RunFlags run;
  bool strict = false, no_filter = false, gradients = false;
  std::map<std::string, std::string> loss_overrides;
  std::string model_path, out_dir, out_path;
  std::vector<int> ks;

  auto* analyze = app.add_subcommand("analyze", "Syntax and structure report for a Verilog file");
  analyze->add_option("file", path_a, "Verilog source")->required();
  add_format(analyze, fmt);

  auto* filter = app.add_subcommand("filter", "Drop multi-module and syntactically broken references");
  filter->add_option("input", path_a, "Corpus JSONL")->required();
  filter->add_option("output", path_b, "Filtered corpus JSONL")->required();
  add_format(filter, fmt);

  auto* score = app.add_subcommand("score", "Quality scores of candidate files against a reference");
  score->add_option("--reference", path_a, "Reference Verilog file")->required();
  score->add_option("candidates", paths, "Candidate Verilog files")->required();
  score->add_flag("--strict-self-contained", strict, "Penalise undeclared instantiations");
  score->add_flag("--no-filter", no_filter, "Score multi-module candidates like any other");
  add_format(score, fmt);

  auto* loss = app.add_subcommand("loss", "Loss breakdown of one scored group");
  loss->add_option("group", path_a, "Group JSON {responses:[{token_logprobs}], scores, reference_index}")->required();
  for (const char* key : {"alpha", "beta", "lambda"}) {
    loss->add_option_function<std::string>(
        std::string("--") + key, [&loss_overrides, key](const std::string& v) { loss_overrides[key] = v; },
        std::string("Override ") + key);
  }
  loss->add_flag("--gradients", gradients, "Include per-token gradients");
  add_format(loss, fmt);

  auto* train = app.add_subcommand("train", "Run the iterative training loop");
  add_run_flags(train, run, true);
  add_format(train, fmt);

  auto* eval = app.add_subcommand("eval", "pass@k evaluation of a checkpoint or remote backend");
  add_run_flags(eval, run, false);
  eval->add_option("--model", model_path, "Checkpoint header (default: final checkpoint of the run)");
  eval->add_option("--k", ks, "k values to report")->delimiter(',');
  eval->add_option("--out-dir", out_dir, "Where to write eval_report.json and eval_verdicts.jsonl");
  add_format(eval, fmt);

  auto* curves = app.add_subcommand("curves", "Export loss curves of a run");
  curves->add_option("manifest", path_a, "Run manifest")->required();
  curves->add_option("--out", out_path, "CSV path (default: <run>/loss_curve.csv)");
  add_format(curves, fmt);

  auto* corpus = app.add_subcommand("corpus", "Write the bundled mini-RTL corpus as JSONL");
  corpus->add_option("--out", out_path, "Output path (default: stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(path_a, fmt, out);
    if (filter->parsed()) return cmd_filter(path_a, path_b, fmt, out);
    if (score->parsed()) return cmd_score(path_a, paths, strict, no_filter, fmt, out);
    if (loss->parsed()) return cmd_loss(path_a, loss_overrides, gradients, fmt, out);
    if (train->parsed()) return cmd_train(run, fmt, out, err);
    if (eval->parsed()) return cmd_eval(run, model_path, ks, out_dir, fmt, out, err);
    if (curves->parsed()) return cmd_curves(path_a, out_path, fmt, out);
    if (corpus->parsed()) return cmd_corpus(out_path, out);
  } catch (const UsageError& e) {
    err << "itertl: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "itertl: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const io::FormatError& e) {
    err << "itertl: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "itertl: invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const pipeline::BackendError& e) {
    err << "itertl: backend error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "itertl: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace itertl::cli

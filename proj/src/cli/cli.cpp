#include "exvqa/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "exvqa/checkpoint.hpp"
#include "exvqa/config.hpp"
#include "exvqa/error.hpp"
#include "exvqa/pipeline.hpp"
#include "exvqa/selftest.hpp"
#include "exvqa/tensor_file.hpp"

namespace exvqa::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_file;
  std::string preset = "default";
  bool quiet = false;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::string> rows;  // evaluate: LABEL=PATH
  CLI::App* sub = nullptr;
};

std::string dashed(std::string name) {
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

void add_run_options(CLI::App& app, Options& o) {
  app.add_option("--config", o.config_file, "JSON file with flat RunConfig keys");
  app.add_option("--preset", o.preset, "Base defaults before the config file and flags")
      ->check(CLI::IsMember({"default", "toy"}));
  app.add_flag("--quiet", o.quiet, "Only log errors");
  for (const auto& f : config_fields()) {
    if (f.kind == FieldKind::kBool) app.add_flag(dashed(f.name), o.flags[f.name]);
    else app.add_option(dashed(f.name), o.values[f.name]);
  }
}

fs::path resolve(const std::string& p) {
  fs::path path(p);
  if (path.empty() || path.is_absolute()) return path;
  if (const char* root = std::getenv(kRunDirEnv); root && *root) return fs::path(root) / path;
  return path;
}

RunConfig build_config(const Options& o) {
  RunConfig cfg = o.preset == "toy" ? toy_config() : RunConfig{};
  if (!o.config_file.empty()) {
    const auto bytes = io::read_file(resolve(o.config_file));
    cfg.merge_json(std::string(bytes.begin(), bytes.end()));
  }
  for (const auto& f : config_fields()) {
    const std::string flag = dashed(f.name);
    if (o.sub->count(flag) == 0) continue;
    if (f.kind == FieldKind::kBool) cfg.set(f.name, o.flags.at(f.name) ? "true" : "false");
    else cfg.set(f.name, o.values.at(f.name));
  }
  for (std::string* p : {&cfg.dataset, &cfg.knowledge_base, &cfg.vocab, &cfg.index, &cfg.checkpoint,
                         &cfg.predictions, &cfg.report, &cfg.retrieval_cache})
    if (!p->empty()) *p = resolve(*p).string();
  cfg.validate();
  return cfg;
}

const std::string& require(const std::string& value, const char* field, const std::string& command) {
  if (value.empty()) throw ConfigError(std::string("config field '") + field + "' is required by " + command);
  return value;
}

std::string echo(const RunConfig& cfg) { return cfg.to_json(false); }

std::string config_header(const RunConfig& cfg) {
  return json{{"config", json::parse(echo(cfg))}}.dump() + "\n";
}

std::vector<data::Instance> load_instances(const RunConfig& cfg, const std::string& command) {
  return data::load_dataset(require(cfg.dataset, "dataset", command), {cfg.captions});
}

// Model state from the checkpoint when one is named, else fresh from the seed.
struct Loaded {
  RunConfig cfg;
  std::unique_ptr<VqaModel> model;
};

Loaded load_model(RunConfig cfg, const text::Vocabulary& vocab) {
  std::optional<io::Checkpoint> ckpt;
  if (!cfg.checkpoint.empty()) {
    ckpt = io::load_checkpoint(cfg.checkpoint);
    cfg.adopt_model(RunConfig::from_json(ckpt->config_json));
    cfg.validate();
  }
  Rng rng(cfg.seed);
  auto model = std::make_unique<VqaModel>(cfg, vocab.size(), rng);
  if (ckpt) {
    restore_params(*ckpt, model->params());
    model->dual.invalidate();
  }
  return {std::move(cfg), std::move(model)};
}

// Index from file when named, else embedded from the knowledge base.
std::optional<retrieval::KnowledgeIndex> knowledge_index(const RunConfig& cfg,
                                                         std::span<const retrieval::KnowledgeItem> base,
                                                         VqaModel& model, const text::Vocabulary& vocab) {
  if (cfg.no_knowledge) return std::nullopt;
  if (!cfg.index.empty()) return retrieval::KnowledgeIndex::load(cfg.index);
  return retrieval::embed_passages(base, model.dual, vocab);
}

std::vector<retrieval::KnowledgeItem> knowledge_base(const RunConfig& cfg, const std::string& command) {
  if (cfg.no_knowledge && cfg.knowledge_base.empty()) return {};
  return retrieval::load_knowledge(require(cfg.knowledge_base, "knowledge_base", command));
}

int cmd_build_vocab(const RunConfig& cfg, std::ostream& out) {
  const auto instances = load_instances(cfg, "build-vocab");
  std::vector<retrieval::KnowledgeItem> base;
  if (!cfg.knowledge_base.empty()) base = retrieval::load_knowledge(cfg.knowledge_base);
  const auto vocab = text::Vocabulary::build(vocabulary_corpus(instances, base), cfg.min_freq);
  const fs::path path = require(cfg.vocab, "vocab", "build-vocab");
  vocab.save(path);
  // The vocabulary format is one token per line, so the echo goes alongside.
  io::write_text_file(path.string() + ".meta.json", json{{"config", json::parse(echo(cfg))}}.dump() + "\n");
  out << "vocabulary: " << vocab.size() << " tokens -> " << path.string() << "\n";
  return 0;
}

int cmd_index(const RunConfig& cfg, std::ostream& out) {
  const auto vocab = text::Vocabulary::load(require(cfg.vocab, "vocab", "index"));
  const auto base = retrieval::load_knowledge(require(cfg.knowledge_base, "knowledge_base", "index"));
  const std::string& path = require(cfg.index, "index", "index");
  auto loaded = load_model(cfg, vocab);
  const auto index = retrieval::embed_passages(base, loaded.model->dual, vocab);
  index.save(path, echo(loaded.cfg));
  out << "index: " << index.size() << " passages, dim " << index.dim() << " -> " << path << "\n";
  return 0;
}

int cmd_retrieve(const RunConfig& cfg, std::ostream& out) {
  const auto vocab = text::Vocabulary::load(require(cfg.vocab, "vocab", "retrieve"));
  const auto index = retrieval::KnowledgeIndex::load(require(cfg.index, "index", "retrieve"));
  const std::string& path = require(cfg.retrieval_cache, "retrieval_cache", "retrieve");
  if (!cfg.knowledge_base.empty() &&
      retrieval::knowledge_fingerprint(retrieval::load_knowledge(cfg.knowledge_base)) != index.base_fingerprint())
    throw StaleIndexError("index " + cfg.index + " was built from a different knowledge base");
  const auto instances = select_split(load_instances(cfg, "retrieve"), cfg);
  auto loaded = load_model(cfg, vocab);
  retrieval::RetrievalCache cache;
  std::string text = config_header(loaded.cfg);
  for (const auto& inst : instances) {
    const auto hits =
        retrieval::retrieve_for_instance(inst, index, loaded.model->dual, vocab, loaded.cfg.knowledge, cache);
    json ids = json::array(), scores = json::array();
    for (const auto& h : hits) {
      ids.push_back(h.id);
      scores.push_back(h.score);
    }
    text += json{{"id", inst.id}, {"knowledge", ids}, {"scores", scores}}.dump() + "\n";
  }
  io::write_text_file(path, text);
  out << "retrieve: " << instances.size() << " instances -> " << path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto vocab = text::Vocabulary::load(require(cfg.vocab, "vocab", "train"));
  const std::string& path = require(cfg.checkpoint, "checkpoint", "train");
  const auto instances = select_split(load_instances(cfg, "train"), cfg);
  const auto base = knowledge_base(cfg, "train");
  Rng rng(cfg.seed);
  VqaModel model(cfg, vocab.size(), rng);
  const auto index = knowledge_index(cfg, base, model, vocab);
  retrieval::RetrievalCache cache;
  const auto prepared = prepare(instances, model, vocab, cfg, {index ? &*index : nullptr, base, &cache});
  const std::size_t total = planned_steps(cfg, prepared.size());
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  const auto log = fit(model, prepared, cfg, rng, [&](std::size_t step, double loss) {
    if (step % every == 0 || step == 1 || step == total) spdlog::info("step {}/{} loss {:.6f}", step, total, loss);
  });
  io::save_checkpoint(io::make_checkpoint(model.params(), echo(cfg), rng), path);
  out << "train: " << log.step_losses.size() << " steps, final batch loss "
      << (log.step_losses.empty() ? 0.0 : log.step_losses.back()) << " -> " << path << "\n";
  return 0;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  const auto vocab = text::Vocabulary::load(require(cfg.vocab, "vocab", "generate"));
  require(cfg.checkpoint, "checkpoint", "generate");
  const std::string& path = require(cfg.predictions, "predictions", "generate");
  auto loaded = load_model(cfg, vocab);
  const RunConfig& run = loaded.cfg;
  const auto instances = select_split(load_instances(run, "generate"), run);
  const auto base = knowledge_base(run, "generate");
  const auto index = knowledge_index(run, base, *loaded.model, vocab);
  retrieval::RetrievalCache cache;
  const auto prepared = prepare(instances, *loaded.model, vocab, run, {index ? &*index : nullptr, base, &cache});
  const auto results = predict(*loaded.model, prepared, run, vocab);
  std::string text = config_header(run);
  for (const auto& r : results) text += metrics::prediction_line(r.prediction) + "\n";
  io::write_text_file(path, text);
  out << "generate: " << results.size() << " predictions -> " << path << "\n";
  return 0;
}

std::string row_label(const fs::path& predictions) {
  const auto bytes = io::read_file(predictions);
  const std::string text(bytes.begin(), bytes.end());
  const std::string first = text.substr(0, text.find('\n'));
  const json head = json::parse(first, nullptr, false);
  if (head.is_discarded() || !head.is_object() || !head.contains("config")) return "full";
  const auto& c = head["config"];
  const bool no_c = c.value("no_captions", false), no_k = c.value("no_knowledge", false);
  if (no_c && no_k) return "w/o C, OK";
  if (no_c) return "w/o C";
  if (no_k) return "w/o OK";
  return "full";
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& extra_rows, std::ostream& out) {
  const std::string& preds = require(cfg.predictions, "predictions", "evaluate");
  const std::string& path = require(cfg.report, "report", "evaluate");
  const auto instances = load_instances(cfg, "evaluate");
  const auto mode = cfg.accuracy == "vqa_soft" ? metrics::AccuracyMode::kVqaSoft : metrics::AccuracyMode::kExact;

  std::vector<metrics::ReportRow> rows;
  rows.push_back({row_label(preds), metrics::evaluate(preds, instances, mode)});
  for (const auto& spec : extra_rows) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw UsageError("--row expects LABEL=PATH, got '" + spec + "'");
    rows.push_back({spec.substr(0, eq), metrics::evaluate(resolve(spec.substr(eq + 1)), instances, mode)});
  }

  json j = json::parse(metrics::report_json(rows.front().report));
  j["label"] = rows.front().label;
  if (rows.size() > 1) {
    j["rows"] = json::array();
    for (const auto& r : rows) {
      json row = json::parse(metrics::report_json(r.report));
      row["label"] = r.label;
      j["rows"].push_back(std::move(row));
    }
  }
  j["config"] = json::parse(echo(cfg));
  const std::string table = metrics::format_table(rows);
  io::write_text_file(path, j.dump(2) + "\n");
  io::write_text_file(path + ".txt", table + "config: " + echo(cfg) + "\n");
  out << table;
  return 0;
}

int cmd_selftest(std::ostream& out) {
  std::vector<selftest::CheckLine> lines = selftest::run_primitive_grad_suite(20, 1e-3);
  lines.push_back(selftest::run_fusion_decoder_grad_check(20, 1e-3));
  for (auto& l : selftest::run_retrieval_oracle(1000, 100, 0)) lines.push_back(std::move(l));
  for (auto& l : selftest::run_metric_fixtures()) lines.push_back(std::move(l));
  std::size_t failed = 0;
  for (const auto& l : lines) {
    out << (l.passed ? "PASS " : "FAIL ") << l.name << ": " << l.detail << "\n";
    failed += !l.passed;
  }
  if (failed) throw ContractError("selftest: " + std::to_string(failed) + " of " + std::to_string(lines.size()) +
                                  " checks failed");
  return 0;
}

void install_logger(bool quiet) {
  static auto logger = [] {
    auto l = spdlog::stderr_logger_mt("exvqa");
    l->set_pattern("%l: %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::err : spdlog::level::info);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Knowledge-augmented VQA with natural-language explanations", "exvqa");
  app.require_subcommand(1);
  Options o;
  std::map<std::string, CLI::App*> subs;
  for (const char* name : {"build-vocab", "index", "retrieve", "train", "generate", "evaluate", "selftest"}) {
    CLI::App* sub = app.add_subcommand(name);
    if (std::string(name) != "selftest") add_run_options(*sub, o);
    subs[name] = sub;
  }
  subs["evaluate"]->add_option("--row", o.rows, "Extra table row LABEL=PREDICTIONS");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << error_code_name(ErrorCode::kUsage) << ": " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) o.sub = sub;
    if (o.sub->get_name() == "selftest") {
      install_logger(true);
      return cmd_selftest(out);
    }
    install_logger(o.quiet);
    const RunConfig cfg = build_config(o);
    const std::string& name = o.sub->get_name();
    if (name == "build-vocab") return cmd_build_vocab(cfg, out);
    if (name == "index") return cmd_index(cfg, out);
    if (name == "retrieve") return cmd_retrieve(cfg, out);
    if (name == "train") return cmd_train(cfg, out);
    if (name == "generate") return cmd_generate(cfg, out);
    return cmd_evaluate(cfg, o.rows, out);
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return e.code() == ErrorCode::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace exvqa::cli

#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "xamr/data.hpp"
#include "xamr/evaluator.hpp"
#include "xamr/linearize.hpp"
#include "xamr/meta_trainer.hpp"
#include "xamr/penman.hpp"
#include "xamr/seq2seq.hpp"
#include "xamr/smatch.hpp"

namespace xamr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown for bad input that should exit with kExitInput.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_logger_st("xamr");
    l->set_pattern("[%l] %v");
    const char* level = std::getenv("XAMR_LOG");
    l->set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
    return l;
  }();
  return log;
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory '" + dir + "': " + ec.message());
}

std::uint64_t language_stream(const std::string& language) {
  return std::stoull(fnv1a_hex(language), nullptr, 16);
}

AmrGraph gold_from_linearized(const ParallelRow& row) {
  try {
    return restore(tokenize_linearized(row.linearized));
  } catch (const Unrestorable& e) {
    throw InputError("line " + std::to_string(row.line) + ": gold graph: " + e.what());
  }
}

std::vector<EvalItem> eval_items(std::span<const ParallelRow> rows, const Vocabularies& vocab) {
  std::vector<EvalItem> items;
  for (const ParallelRow& r : rows)
    items.push_back({r.sentence, encode_row(r, vocab), gold_from_linearized(r)});
  return items;
}

// ---- smatch ----

struct SmatchArgs {
  std::string candidate, gold, report;
  int restarts = 4;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int cmd_smatch(const SmatchArgs& a, std::ostream& out) {
  std::vector<AmrGraph> cand, gold;
  try {
    cand = read_graphs(a.candidate);
    gold = read_graphs(a.gold);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  if (cand.size() != gold.size())
    throw InputError("candidate has " + std::to_string(cand.size()) + " graphs, gold has " +
                     std::to_string(gold.size()));
  if (cand.empty()) throw InputError("no graphs to score");
  std::vector<GraphPair> pairs;
  for (std::size_t i = 0; i < cand.size(); ++i) pairs.push_back({&cand[i], &gold[i]});
  const CorpusSmatch s =
      corpus_smatch(pairs, {.restarts = a.restarts, .seed = a.seed}, a.threads);
  if (!a.report.empty()) {
    std::ofstream rep = open_output(a.report);
    rep << "pair\tprecision\trecall\tf1\tmatched\tcandidate_triples\tgold_triples\n";
    for (std::size_t i = 0; i < s.pairs.size(); ++i) {
      const SmatchScore& p = s.pairs[i];
      rep << i + 1 << '\t' << format4(p.precision) << '\t' << format4(p.recall) << '\t'
          << format4(p.f1) << '\t' << p.matched << '\t' << p.total_left << '\t'
          << p.total_right << '\n';
    }
  }
  out << format4(s.total.precision) << ' ' << format4(s.total.recall) << ' '
      << format4(s.total.f1) << '\n';
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string mode, config, data_dir, out;
  std::optional<unsigned> threads;
};

struct ExperimentConfig {
  TrainConfig train;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::vector<std::string> dev_languages;  // empty: training languages
  std::size_t dev_max_sentences = 0;       // per language; 0 = all
  std::size_t dev_max_len = 64;
  int dev_restarts = 2;
};

template <typename T>
T json_get(const json& j, const char* section, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + section + "." + key +
                      "' has the wrong type");
  }
}

ExperimentConfig parse_experiment(const std::string& text, std::size_t languages) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  if (auto m = j.find("model"); m != j.end()) {
    for (const auto& [key, v] : m->items())
      if (key != "embed_dim" && key != "hidden_dim")
        throw ConfigError("unknown config field 'model." + key + "'");
    c.embed_dim = json_get(*m, "model", "embed_dim", c.embed_dim);
    c.hidden_dim = json_get(*m, "model", "hidden_dim", c.hidden_dim);
    j.erase("model");
  }
  if (auto d = j.find("dev"); d != j.end()) {
    for (const auto& [key, v] : d->items())
      if (key != "languages" && key != "max_sentences" && key != "max_len" && key != "restarts")
        throw ConfigError("unknown config field 'dev." + key + "'");
    c.dev_languages = json_get(*d, "dev", "languages", c.dev_languages);
    c.dev_max_sentences = json_get(*d, "dev", "max_sentences", c.dev_max_sentences);
    c.dev_max_len = json_get(*d, "dev", "max_len", c.dev_max_len);
    c.dev_restarts = json_get(*d, "dev", "restarts", c.dev_restarts);
    j.erase("dev");
  }
  if (c.embed_dim < 1 || c.hidden_dim < 1) throw ConfigError("model dimensions must be >= 1");
  if (c.dev_max_len < 1 || c.dev_restarts < 1)
    throw ConfigError("dev.max_len and dev.restarts must be >= 1");
  TrainConfig defaults;
  defaults.I = languages;
  c.train = parse_train_config(j.dump(), defaults);
  return c;
}

json experiment_json(const ExperimentConfig& c, const std::string& mode) {
  return {{"type", "config"},
          {"mode", mode},
          {"train", json::parse(train_config_json(c.train))},
          {"model", {{"embed_dim", c.embed_dim}, {"hidden_dim", c.hidden_dim}}},
          {"dev",
           {{"languages", c.dev_languages},
            {"max_sentences", c.dev_max_sentences},
            {"max_len", c.dev_max_len},
            {"restarts", c.dev_restarts}}}};
}

std::vector<ParallelRow> read_rows(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing data file '" + path.string() + "'");
  return read_parallel_tsv(path.string());
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const fs::path dir(a.data_dir);
  if (!fs::is_directory(dir)) throw InputError("data directory '" + a.data_dir + "' not found");
  const std::vector<ParallelRow> train_rows = read_rows(dir / "train.tsv");
  const std::vector<ParallelRow> dev_rows = read_rows(dir / "dev.tsv");
  std::vector<ParallelRow> all_rows = train_rows;
  all_rows.insert(all_rows.end(), dev_rows.begin(), dev_rows.end());
  if (fs::exists(dir / "test.tsv")) {
    auto test_rows = read_rows(dir / "test.tsv");
    all_rows.insert(all_rows.end(), test_rows.begin(), test_rows.end());
  }
  if (train_rows.empty()) throw InputError("train.tsv has no rows");
  const auto train_sets = group_by_language(train_rows);

  ExperimentConfig cfg = parse_experiment(a.config.empty() ? "{}" : read_file(a.config),
                                          train_sets.size());
  if (a.threads) cfg.train.threads = *a.threads;
  std::vector<std::string> dev_langs = cfg.dev_languages;
  if (dev_langs.empty())
    for (const auto& d : train_sets) dev_langs.push_back(d.language);

  const Vocabularies vocab = build_vocab(all_rows);
  const auto train_data = encode_datasets(train_sets, vocab);

  std::vector<ParallelRow> dev_selected;
  for (const auto& d : group_by_language(dev_rows)) {
    if (std::find(dev_langs.begin(), dev_langs.end(), d.language) == dev_langs.end()) continue;
    const std::size_t n = cfg.dev_max_sentences == 0
                              ? d.examples.size()
                              : std::min(cfg.dev_max_sentences, d.examples.size());
    dev_selected.insert(dev_selected.end(), d.examples.begin(), d.examples.begin() + n);
  }
  if (dev_selected.empty()) throw InputError("no dev rows for the dev languages");
  const std::vector<EvalItem> dev_items = eval_items(dev_selected, vocab);

  ModelConfig mc{cfg.embed_dim, cfg.hidden_dim, vocab.source.size(), vocab.target.size()};
  const ModelParams init = init_params(mc, derive_seed(cfg.train.seed, 0x1417));
  const Objective<Example> objective = seq2seq_objective(init);
  EvalOptions dev_options{.max_len = cfg.dev_max_len,
                          .restarts = cfg.dev_restarts,
                          .seed = cfg.train.seed,
                          .threads = cfg.train.threads};
  DevEval dev = [&](const Params& values) {
    ModelParams p{mc, init.registry, values};
    return evaluate(p, vocab.target, dev_items, dev_options).smatch.f1;
  };

  ensure_dir(a.out);
  std::ofstream log = open_output((fs::path(a.out) / "train_log.jsonl").string());
  log << experiment_json(cfg, a.mode).dump() << '\n';
  auto sink = [&](const LogRecord& r) {
    log << log_record_json(r) << '\n';
    if (r.dev)
      logger()->info("step {} rate {:.3g} dev smatch {:.4f}", r.step, r.rate, *r.dev);
  };
  logger()->info("{} training on {} languages, {} parameters", a.mode, train_data.size(),
                 init.values.size());
  const TrainResult result =
      a.mode == "maml"
          ? maml_train<Example>(init.values, train_data, cfg.train, objective, dev, sink)
          : joint_train<Example>(init.values, train_data, cfg.train, objective, dev, sink);
  log << json{{"type", "result"},
              {"best_step", result.best_step},
              {"best_dev_smatch", result.best_dev},
              {"steps_run", result.steps_run},
              {"early_stopped", result.early_stopped}}
             .dump()
      << '\n';
  if (!log) throw InputError("failed writing the training log");

  Model model{vocab.source, vocab.target, ModelParams{mc, init.registry, result.best}};
  save_checkpoint(model, (fs::path(a.out) / "checkpoint.bin").string());
  out << "best step " << result.best_step << " dev smatch " << format4(result.best_dev)
      << '\n';
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, test, shots, out, model_label = "model", language;
  std::size_t k = 0, epochs = 1, max_len = 64;
  double lr = 1e-5;
  int restarts = 4;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.k > 0 && a.shots.empty()) throw InputError("--k > 0 requires --shots");
  Model model;
  try {
    model = load_checkpoint(a.checkpoint);
  } catch (const CheckpointError& e) {
    throw InputError(e.what());
  }
  const Vocabularies vocab{model.source, model.target};
  auto test_sets = group_by_language(read_parallel_tsv(a.test));
  if (!a.language.empty())
    std::erase_if(test_sets, [&](const auto& d) { return d.language != a.language; });
  if (test_sets.empty()) throw InputError("no test rows to evaluate");
  std::vector<LanguageDataset<ParallelRow>> shot_sets;
  if (a.k > 0) shot_sets = group_by_language(read_parallel_tsv(a.shots));

  ensure_dir(a.out);
  for (const auto& test : test_sets) {
    ModelParams params = model.params;
    if (a.k > 0) {
      std::vector<Example> pool;
      for (const auto& s : shot_sets)
        if (s.language == test.language)
          for (const ParallelRow& r : s.examples) pool.push_back(encode_row(r, vocab));
      if (pool.size() < a.k)
        throw InputError("language '" + test.language + "' has " + std::to_string(pool.size()) +
                         " shots, --k needs " + std::to_string(a.k));
      Rng rng(derive_seed(a.seed, language_stream(test.language)));
      params = kshot_finetune(params, pool, a.k, {.lr = a.lr, .epochs = a.epochs}, rng);
    }
    const auto items = eval_items(test.examples, vocab);
    EvalReport report = evaluate(
        params, vocab.target, items,
        {.max_len = a.max_len, .restarts = a.restarts, .seed = a.seed, .threads = a.threads});
    report.model = a.model_label;
    report.language = test.language;
    report.k = a.k;
    report.lr = a.lr;
    const fs::path path = fs::path(a.out) / (a.model_label + "_" + test.language + "_k" +
                                             std::to_string(a.k) + ".jsonl");
    save_report(report, path.string());
    out << test.language << "\tk=" << a.k << '\t' << format4(report.smatch.precision) << ' '
        << format4(report.smatch.recall) << ' ' << format4(report.smatch.f1) << '\n';
  }
  return kExitOk;
}

// ---- small commands ----

int cmd_gen_synthetic(const std::string& spec_path, const std::string& out_dir,
                      std::ostream& out) {
  const SyntheticSpec spec =
      spec_path.empty() ? SyntheticSpec{} : parse_synthetic_spec(read_file(spec_path));
  const SyntheticCorpus corpus = generate_synthetic(spec);
  write_synthetic(spec, corpus, out_dir);
  out << "train " << corpus.train.size() << " dev " << corpus.dev.size() << " test "
      << corpus.test.size() << '\n';
  return kExitOk;
}

int cmd_linearize(const std::string& in_path, const std::string& out_path,
                  const std::string& language) {
  const Corpus corpus = load_amr_corpus(in_path);
  for (const std::string& w : corpus.warnings) logger()->warn("{}: {}", in_path, w);
  std::vector<ParallelRow> rows;
  for (const CorpusEntry& e : corpus.entries)
    rows.push_back({language, e.sentence, preprocess(e.graph).text(), e.line});
  std::ofstream out = open_output(out_path);
  write_parallel_tsv(out, rows);
  return kExitOk;
}

int cmd_restore(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + in_path + "'");
  std::vector<CorpusEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    CorpusEntry e;
    e.line = line_no;
    std::string linearized = line;
    if (std::count(line.begin(), line.end(), '\t') == 2) {
      const std::size_t t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
      e.metadata["lang"] = line.substr(0, t1);
      e.sentence = line.substr(t1 + 1, t2 - t1 - 1);
      linearized = line.substr(t2 + 1);
    }
    try {
      e.graph = restore(tokenize_linearized(linearized));
    } catch (const Unrestorable& err) {
      logger()->warn("line {}: {}; writing a placeholder graph", line_no, err.what());
      e.graph = dummy_graph();
    }
    entries.push_back(std::move(e));
  }
  std::ofstream out = open_output(out_path);
  write_amr_corpus(out, entries);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out_path,
                const std::string& deltas_path, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const std::string& p : paths) {
    try {
      reports.push_back(load_report(p));
    } catch (const std::exception& e) {
      throw InputError(p + ": " + e.what());
    }
  }
  const ComparisonTable table = compare_runs(reports);
  if (out_path.empty()) {
    write_comparison_tsv(out, table.rows, table.languages);
  } else {
    std::ofstream f = open_output(out_path);
    write_comparison_tsv(f, table.rows, table.languages);
  }
  if (!deltas_path.empty()) {
    std::ofstream f = open_output(deltas_path);
    write_comparison_tsv(f, table.deltas, table.languages);
  }
  return kExitOk;
}

int cmd_penman(const std::string& in_path, std::ostream& out) {
  std::vector<AmrGraph> graphs;
  try {
    graphs = read_graphs(in_path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  for (const AmrGraph& g : graphs) {
    if (auto v = validate(g); !v.empty()) throw InputError(v.front().message);
    out << serialize_penman(g) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-lingual AMR parsing toolkit", "xamr"};
  app.require_subcommand(1);

  SmatchArgs sm;
  auto* smatch = app.add_subcommand("smatch", "Corpus Smatch between two graph files");
  smatch->add_option("candidate", sm.candidate, "Candidate graphs")->required();
  smatch->add_option("gold", sm.gold, "Gold graphs")->required();
  smatch->add_option("--restarts", sm.restarts, "Hill-climbing restarts")
      ->check(CLI::PositiveNumber);
  smatch->add_option("--seed", sm.seed, "Random seed");
  smatch->add_option("--report", sm.report, "Per-pair TSV output");
  smatch->add_option("--threads", sm.threads, "Worker threads");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train with first-order MAML or joint learning");
  train->add_option("--mode", tr.mode, "maml or joint")
      ->required()
      ->check(CLI::IsMember({"maml", "joint"}));
  train->add_option("--config", tr.config, "Training config (JSON)");
  train->add_option("--data-dir", tr.data_dir, "Directory with train.tsv and dev.tsv")
      ->required();
  train->add_option("--out", tr.out, "Output directory")->required();
  train->add_option("--threads", tr.threads, "Worker threads (overrides the config)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "k-shot evaluation of a checkpoint");
  eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  eval->add_option("--test", ev.test, "Test TSV")->required();
  eval->add_option("--k", ev.k, "Number of fine-tuning shots")->required();
  eval->add_option("--shots", ev.shots, "Shot pool TSV");
  eval->add_option("--seed", ev.seed, "Random seed");
  eval->add_option("--out", ev.out, "Report directory")->required();
  eval->add_option("--lr", ev.lr, "Fine-tuning learning rate")->check(CLI::PositiveNumber);
  eval->add_option("--epochs", ev.epochs, "Fine-tuning epochs");
  eval->add_option("--max-len", ev.max_len, "Decoding length limit")->check(CLI::PositiveNumber);
  eval->add_option("--restarts", ev.restarts, "Smatch restarts")->check(CLI::PositiveNumber);
  eval->add_option("--model-label", ev.model_label, "Model name used in reports");
  eval->add_option("--language", ev.language, "Only evaluate this language");
  eval->add_option("--threads", ev.threads, "Worker threads");

  std::string spec_path, synth_out;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic language family");
  gen->add_option("--spec", spec_path, "Spec JSON (defaults if omitted)");
  gen->add_option("--out-dir", synth_out, "Output directory")->required();

  std::string lin_in, lin_out, lin_lang = "en";
  auto* lin = app.add_subcommand("linearize", "AMR corpus to parallel TSV");
  lin->add_option("--in", lin_in, "AMR corpus file")->required();
  lin->add_option("--out", lin_out, "TSV output")->required();
  lin->add_option("--lang", lin_lang, "Language code column");

  std::string res_in, res_out;
  auto* res = app.add_subcommand("restore", "Linearized graphs back to an AMR corpus");
  res->add_option("--in", res_in, "TSV or one linearization per line")->required();
  res->add_option("--out", res_out, "AMR corpus output")->required();

  std::vector<std::string> report_paths;
  std::string cmp_out, cmp_deltas;
  auto* cmp = app.add_subcommand("compare", "Model-by-k comparison table of eval reports");
  cmp->add_option("--reports", report_paths, "Report files")->required();
  cmp->add_option("--out", cmp_out, "TSV output (stdout if omitted)");
  cmp->add_option("--deltas", cmp_deltas, "TSV of differences to the first model");

  std::string pen_in;
  auto* pen = app.add_subcommand("penman", "Canonical single-line PENMAN");
  pen->add_option("--in", pen_in, "Graph file")->required();

  std::vector<std::string> argv_store{"xamr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*smatch) return cmd_smatch(sm, out);
    if (*train) return cmd_train(tr, out);
    if (*eval) return cmd_eval(ev, out);
    if (*gen) return cmd_gen_synthetic(spec_path, synth_out, out);
    if (*lin) return cmd_linearize(lin_in, lin_out, lin_lang);
    if (*res) return cmd_restore(res_in, res_out);
    if (*cmp) return cmd_compare(report_paths, cmp_out, cmp_deltas, out);
    if (*pen) return cmd_penman(pen_in, out);
  } catch (const ad::NonFinite& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const TsvError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InsufficientData& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InsufficientShots& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GridMismatch& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const PenmanError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace xamr::cli

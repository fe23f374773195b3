#include "xamr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "xamr/linearize.hpp"
#include "xamr/parallel.hpp"

namespace xamr {

using nlohmann::json;

ModelParams kshot_finetune(const ModelParams& params, std::span<const Example> pool,
                           std::size_t k, const FinetuneOptions& options, Rng& rng) {
  ModelParams out = params;
  if (k == 0) return out;
  if (pool.size() < k)
    throw InsufficientShots("need " + std::to_string(k) + " shots, pool has " +
                            std::to_string(pool.size()));
  if (options.max_batch == 0) throw std::invalid_argument("max_batch must be >= 1");
  std::vector<Example> shots;
  for (std::size_t i : sample_without_replacement(pool.size(), k, rng))
    shots.push_back(pool[i]);
  const std::size_t batch = std::min(k, options.max_batch);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(shots, rng);
    for (std::size_t begin = 0; begin < k; begin += batch) {
      const std::span<const Example> part(shots.data() + begin, std::min(batch, k - begin));
      const LossAndGradient lg = loss_and_gradient(out, part);
      for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= options.lr * lg.gradient[i];
    }
  }
  for (double v : out.values)
    if (!std::isfinite(v)) throw ad::NonFinite("fine-tuning produced a non-finite parameter");
  return out;
}

AmrGraph dummy_graph() {
  AmrGraph g;
  g.root = "v0";
  g.nodes.emplace("v0", "amr-empty");
  return g;
}

EvalReport evaluate(const ModelParams& params, const Vocab& target_vocab,
                    std::span<const EvalItem> test, const EvalOptions& options) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  if (options.decode_chunk == 0) throw std::invalid_argument("decode_chunk must be >= 1");
  const std::size_t n = test.size();
  std::vector<std::vector<int>> hyp_ids(n);
  const std::size_t chunks = (n + options.decode_chunk - 1) / options.decode_chunk;
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t begin = c * options.decode_chunk;
    const std::size_t end = std::min(n, begin + options.decode_chunk);
    std::vector<std::vector<int>> sources;
    for (std::size_t i = begin; i < end; ++i) sources.push_back(test[i].example.source);
    auto out = generate_greedy_batch(params, sources, options.max_len);
    for (std::size_t i = begin; i < end; ++i) hyp_ids[i] = std::move(out[i - begin]);
  });

  EvalReport report;
  report.seed = options.seed;
  std::vector<AmrGraph> hypotheses(n);
  report.sentences.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    SentenceRecord& rec = report.sentences[i];
    rec.source = test[i].sentence;
    for (int id : hyp_ids[i]) rec.hypothesis.push_back(target_vocab.token(id));
    try {
      hypotheses[i] = restore(rec.hypothesis);
      if (!validate(hypotheses[i]).empty()) throw Unrestorable("restored graph is invalid");
    } catch (const Unrestorable&) {
      hypotheses[i] = dummy_graph();
      rec.unrestorable = true;
    }
    rec.restored = serialize_penman(hypotheses[i]);
  }
  std::vector<GraphPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({&hypotheses[i], &test[i].gold});
  CorpusSmatch scored =
      corpus_smatch(pairs, {.restarts = options.restarts, .seed = options.seed}, options.threads);
  for (std::size_t i = 0; i < n; ++i) {
    SentenceRecord& rec = report.sentences[i];
    rec.matched = scored.pairs[i].matched;
    rec.total_left = scored.pairs[i].total_left;
    rec.total_right = scored.pairs[i].total_right;
    rec.f1 = scored.pairs[i].f1;
  }
  report.smatch = scored.total;
  return report;
}

// ---- report files ----

void write_report(std::ostream& out, const EvalReport& r) {
  for (const SentenceRecord& s : r.sentences) {
    json j = {{"type", "sentence"},       {"source", s.source},
              {"hypothesis", s.hypothesis}, {"restored", s.restored},
              {"unrestorable", s.unrestorable}, {"matched", s.matched},
              {"total_left", s.total_left}, {"total_right", s.total_right},
              {"f1", s.f1}};
    out << j.dump() << '\n';
  }
  json summary = {{"type", "summary"},
                  {"model", r.model},
                  {"language", r.language},
                  {"k", r.k},
                  {"lr", r.lr},
                  {"seed", r.seed},
                  {"sentences", r.sentences.size()},
                  {"precision", r.smatch.precision},
                  {"recall", r.smatch.recall},
                  {"f1", r.smatch.f1},
                  {"matched", r.smatch.matched},
                  {"total_left", r.smatch.total_left},
                  {"total_right", r.smatch.total_right}};
  out << summary.dump() << '\n';
}

EvalReport read_report(std::istream& in) {
  EvalReport r;
  bool have_summary = false;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "sentence") {
        SentenceRecord s;
        s.source = j.at("source");
        s.hypothesis = j.at("hypothesis").get<std::vector<std::string>>();
        s.restored = j.at("restored");
        s.unrestorable = j.at("unrestorable");
        s.matched = j.at("matched");
        s.total_left = j.at("total_left");
        s.total_right = j.at("total_right");
        s.f1 = j.at("f1");
        r.sentences.push_back(std::move(s));
      } else if (type == "summary") {
        r.model = j.at("model");
        r.language = j.at("language");
        r.k = j.at("k");
        r.lr = j.at("lr");
        r.seed = j.at("seed");
        r.smatch = make_score(j.at("matched"), j.at("total_left"), j.at("total_right"));
        have_summary = true;
      } else {
        throw std::invalid_argument("unknown record type '" + type + "'");
      }
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("report line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_summary) throw std::invalid_argument("report has no summary record");
  return r;
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  write_report(out, report);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open report '" + path + "'");
  return read_report(in);
}

// ---- comparison grid ----

ComparisonTable compare_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw GridMismatch("no reports to compare");
  ComparisonTable table;
  std::vector<std::string> models;
  std::map<std::size_t, int> ks;
  std::map<std::tuple<std::string, std::size_t, std::string>, double> cells;
  for (const EvalReport& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end())
      models.push_back(r.model);
    if (std::find(table.languages.begin(), table.languages.end(), r.language) ==
        table.languages.end())
      table.languages.push_back(r.language);
    ks[r.k] = 0;
    if (!cells.emplace(std::make_tuple(r.model, r.k, r.language), r.smatch.f1).second)
      throw GridMismatch("duplicate report for model '" + r.model + "', k=" +
                         std::to_string(r.k) + ", language '" + r.language + "'");
  }
  if (cells.size() != models.size() * ks.size() * table.languages.size())
    throw GridMismatch("reports do not cover the same languages and k values for every model");

  auto make_row = [&](const std::string& model, std::size_t k) {
    ComparisonRow row;
    row.model = model;
    row.k = k;
    row.label = model + "_" + std::to_string(k) + "-shot";
    for (const std::string& lang : table.languages)
      row.cells.push_back(cells.at({model, k, lang}));
    double sum = 0.0;
    for (double c : row.cells) sum += c;
    row.avg = sum / static_cast<double>(row.cells.size());
    return row;
  };
  for (const std::string& model : models)
    for (const auto& [k, unused] : ks) table.rows.push_back(make_row(model, k));
  for (std::size_t m = 1; m < models.size(); ++m) {
    for (const auto& [k, unused] : ks) {
      ComparisonRow a = make_row(models[m], k);
      const ComparisonRow b = make_row(models[0], k);
      a.label = models[m] + "-" + models[0] + "_" + std::to_string(k) + "-shot";
      for (std::size_t i = 0; i < a.cells.size(); ++i) a.cells[i] -= b.cells[i];
      a.avg -= b.avg;
      table.deltas.push_back(std::move(a));
    }
  }
  return table;
}

void write_comparison_tsv(std::ostream& out, std::span<const ComparisonRow> rows,
                          std::span<const std::string> languages) {
  out << "model";
  for (const std::string& l : languages) out << '\t' << l;
  out << "\tavg\n";
  char buf[32];
  for (const ComparisonRow& row : rows) {
    out << row.label;
    for (double c : row.cells) {
      std::snprintf(buf, sizeof buf, "%.4f", c);
      out << '\t' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.4f", row.avg);
    out << '\t' << buf << '\n';
  }
}

}  // namespace xamr

// k-shot evaluation: fine-tune a copy of the model on k target-language
// shots, decode the test set greedily, restore graphs and score them with
// corpus Smatch. Reports from several runs combine into a model-by-k grid.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xamr/penman.hpp"
#include "xamr/random.hpp"
#include "xamr/seq2seq.hpp"
#include "xamr/smatch.hpp"

namespace xamr {

class InsufficientShots : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FinetuneOptions {
  double lr = 1e-5;
  std::size_t epochs = 1;
  std::size_t max_batch = 8;
};

// k = 0 returns an unchanged copy. Otherwise draws k shots from the pool,
// then runs `epochs` passes of mean-loss SGD over them in a fresh shuffled
// order per epoch, with batches of min(k, max_batch).
ModelParams kshot_finetune(const ModelParams& params, std::span<const Example> pool,
                           std::size_t k, const FinetuneOptions& options, Rng& rng);

// Graph used for hypotheses that cannot be restored.
AmrGraph dummy_graph();

struct EvalItem {
  std::string sentence;
  Example example;
  AmrGraph gold;
};

struct SentenceRecord {
  std::string source;
  std::vector<std::string> hypothesis;
  std::string restored;  // canonical PENMAN of the scored graph
  bool unrestorable = false;
  long matched = 0;
  long total_left = 0;
  long total_right = 0;
  double f1 = 0.0;
};

struct EvalReport {
  std::string model;
  std::string language;
  std::size_t k = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  SmatchScore smatch;
  std::vector<SentenceRecord> sentences;
};

struct EvalOptions {
  std::size_t max_len = 64;
  int restarts = 4;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t decode_chunk = 32;  // fixed so results do not depend on threads
};

// Fills every field except model, language, k and lr.
EvalReport evaluate(const ModelParams& params, const Vocab& target_vocab,
                    std::span<const EvalItem> test, const EvalOptions& options);

// Line-delimited JSON: one record per sentence, then one summary record.
void write_report(std::ostream& out, const EvalReport& report);
EvalReport read_report(std::istream& in);
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ComparisonRow {
  std::string label;  // "<model>_<k>-shot", or "<model>-<baseline>_<k>-shot" for deltas
  std::string model;
  std::size_t k = 0;
  std::vector<double> cells;  // per language, f1
  double avg = 0.0;           // unweighted mean of cells
};

struct ComparisonTable {
  std::vector<std::string> languages;  // first-appearance order
  std::vector<ComparisonRow> rows;     // models in first-appearance order, k ascending
  // Each later model minus the first model, cell by cell.
  std::vector<ComparisonRow> deltas;
};

// Every model must cover the same (language, k) cells exactly once.
ComparisonTable compare_runs(std::span<const EvalReport> reports);

// Header "model", languages..., "avg"; cells with 4 decimals.
void write_comparison_tsv(std::ostream& out, std::span<const ComparisonRow> rows,
                          std::span<const std::string> languages);

}  // namespace xamr

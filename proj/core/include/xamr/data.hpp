// Corpus ingestion (AMR block files and three-column parallel TSV),
// vocabulary construction, and a synthetic multilingual corpus generator.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xamr/meta_trainer.hpp"
#include "xamr/penman.hpp"
#include "xamr/seq2seq.hpp"

namespace xamr {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- AMR corpus files ----
//
// Records are separated by blank lines. "# ::key value" lines carry
// metadata (several keys may share a line); other '#' lines are comments;
// the remaining lines of a record form one PENMAN graph.

struct CorpusEntry {
  std::map<std::string, std::string> metadata;
  std::string sentence;  // the "snt" metadata value
  AmrGraph graph;
  std::size_t line = 0;  // first line of the record, 1-based
};

struct Corpus {
  std::string source_path;
  std::vector<CorpusEntry> entries;
  // One message per rejected record ("line N: reason").
  std::vector<std::string> warnings;
};

// Malformed records are skipped and reported in Corpus::warnings.
Corpus parse_amr_corpus(std::istream& in, const std::string& source_name);
Corpus load_amr_corpus(const std::string& path);

void write_amr_corpus(std::ostream& out, std::span<const CorpusEntry> entries);

// Every graph in a file, ignoring '#' lines. A graph may span lines or
// share none; a new graph starts whenever parentheses are balanced. Throws
// PenmanError (offsets relative to the graph text) wrapped in IoError with
// the starting line.
std::vector<AmrGraph> read_graphs(std::istream& in);
std::vector<AmrGraph> read_graphs(const std::string& path);

// ---- parallel TSV ----

struct ParallelRow {
  std::string language;
  std::string sentence;
  std::string linearized;
  std::size_t line = 0;
};

class TsvError : public std::runtime_error {
 public:
  enum class Kind { kColumnCount, kEmptyField };
  TsvError(Kind kind, std::size_t line, const std::string& detail);
  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

// Blank lines are skipped.
std::vector<ParallelRow> parse_parallel_tsv(std::istream& in);
std::vector<ParallelRow> read_parallel_tsv(const std::string& path);
void write_parallel_tsv(std::ostream& out, std::span<const ParallelRow> rows);

// Groups rows by language, languages in order of first appearance.
std::vector<LanguageDataset<ParallelRow>> group_by_language(
    std::span<const ParallelRow> rows);
std::vector<LanguageDataset<ParallelRow>> load_parallel_tsv(const std::string& path);

std::vector<std::string> split_whitespace(const std::string& text);

struct Vocabularies {
  Vocab source;
  Vocab target;
};

// Specials, then language tags in code order, then tokens by descending
// count with ties in lexicographic order. Tokens seen fewer than min_count
// times are left out (they encode as UNK).
Vocabularies build_vocab(std::span<const ParallelRow> rows, std::size_t min_count = 1);

Example encode_row(const ParallelRow& row, const Vocabularies& vocab);
std::vector<LanguageDataset<Example>> encode_datasets(
    std::span<const LanguageDataset<ParallelRow>> datasets, const Vocabularies& vocab);

// ---- synthetic language family ----

struct SyntheticLanguage {
  std::string code;
  bool cipher = true;  // language-specific surface tokens via a permutation
  bool swap = false;   // swap adjacent word pairs
};

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t num_languages = 8;
  std::size_t vocab_size = 24;
  std::size_t min_length = 2;
  std::size_t max_length = 5;
  std::size_t held_out = 2;  // the last languages; dev/test only
  std::size_t train_size = 400;  // sentences per training language
  std::size_t dev_size = 160;    // per language
  std::size_t test_size = 100;   // per language
  // Empty means: "l0" identity, then "l1".. ciphers, even ones also swapped.
  std::vector<SyntheticLanguage> languages;

  // Resolved language list (default pattern applied if `languages` is empty).
  std::vector<SyntheticLanguage> resolved_languages() const;
};

// Throws ConfigError.
void validate_spec(const SyntheticSpec& spec);
SyntheticSpec parse_synthetic_spec(const std::string& json_text);
std::string synthetic_spec_json(const SyntheticSpec& spec);

// Concept for base token i of the pivot vocabulary.
std::string synthetic_concept(std::size_t i);
// Linearized left-leaning chain over the concepts of a pivot sentence, roles
// alternating :ARG0 / :ARG1 with depth.
std::vector<std::string> synthetic_target(std::span<const std::size_t> pivot);

struct SyntheticCorpus {
  std::vector<ParallelRow> train;
  std::vector<ParallelRow> dev;
  std::vector<ParallelRow> test;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Writes train.tsv, dev.tsv, test.tsv and manifest.json into `dir`
// (created if missing). Returns the manifest text.
std::string write_synthetic(const SyntheticSpec& spec, const SyntheticCorpus& corpus,
                            const std::string& dir);

// 64-bit FNV-1a, as lower-case hex.
std::string fnv1a_hex(std::string_view bytes);

std::string read_file(const std::string& path);

}  // namespace xamr

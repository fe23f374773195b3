// Smatch: triple-overlap F1 between AMR graphs under the best injective
// variable mapping, found by restarted hill-climbing or, for small graphs,
// by exhaustive enumeration.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "xamr/penman.hpp"

namespace xamr {

// Triples over dense variable indices. Attribute triples include
// ("TOP", root, "top").
struct TripleSet {
  std::vector<std::string> variables;  // index -> variable name
  std::vector<std::pair<int, std::string>> instances;
  std::vector<std::tuple<std::string, int, int>> relations;
  std::vector<std::tuple<std::string, int, std::string>> attributes;

  std::size_t size() const {
    return instances.size() + relations.size() + attributes.size();
  }
};

inline constexpr const char* kTopRole = "TOP";
inline constexpr const char* kTopValue = "top";

// Duplicated triples are collapsed.
TripleSet extract_triples(const AmrGraph& g);

// Injective partial map from left variable indices to right variable
// indices; -1 marks an unmapped variable.
using VariableMapping = std::vector<int>;

// Number of left triples identical to some right triple under `mapping`.
int score_mapping(const TripleSet& left, const TripleSet& right,
                  const VariableMapping& mapping);

struct SmatchScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long matched = 0;
  long total_left = 0;   // candidate triples
  long total_right = 0;  // gold triples
  std::map<std::string, std::string> mapping;  // candidate var -> gold var
};

// Fills precision/recall/f1 from the counts.
SmatchScore make_score(long matched, long total_left, long total_right);

struct SmatchOptions {
  int restarts = 4;
  std::uint64_t seed = 0;
};

// Candidate first (precision denominator), gold second.
SmatchScore compute_smatch(const AmrGraph& candidate, const AmrGraph& gold,
                           const SmatchOptions& options = {});

class SmatchTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kExactSmatchMaxVariables = 8;

// Globally optimal mapping by enumeration; throws SmatchTooLarge above
// kExactSmatchMaxVariables variables on either side.
SmatchScore compute_smatch_exact(const AmrGraph& candidate,
                                 const AmrGraph& gold);

class EmptyCorpus : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GraphPair {
  const AmrGraph* candidate;
  const AmrGraph* gold;
};

struct CorpusSmatch {
  SmatchScore total;                // micro-average; mapping left empty
  std::vector<SmatchScore> pairs;   // per pair, in input order
};

// Micro-averaged Smatch. Pair i is scored with a seed derived from
// (options.seed, i), so results do not depend on `threads`.
CorpusSmatch corpus_smatch(const std::vector<GraphPair>& pairs,
                           const SmatchOptions& options = {},
                           unsigned threads = 1);

}  // namespace xamr

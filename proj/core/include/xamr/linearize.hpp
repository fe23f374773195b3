// Variable-free single-line AMR sequences: graph -> tokens and the repairing
// inverse used on model output.

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xamr/penman.hpp"

namespace xamr {

struct LinearizedAmr {
  std::vector<std::string> tokens;

  // Tokens joined by single spaces.
  std::string text() const;
};

// Splits a linearized string on whitespace. Parentheses glued to
// neighbouring text ("(dog)") are split off as standalone tokens.
std::vector<std::string> tokenize_linearized(std::string_view text);

// Drops :wiki attributes and variables. Re-entrant references become a
// single-node copy "( concept )" of the referenced node. Traversal order
// matches serialize_penman. Quoted constants containing whitespace have
// it replaced by '_' so every constant stays one token.
LinearizedAmr preprocess(const AmrGraph& g);

class Unrestorable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rebuilds a valid graph from arbitrary token sequences. Repairs, in order:
// roles without a following value are dropped, stray closers are dropped
// and missing closers appended, then variables v0, v1, ... are assigned in
// left-to-right order. A node opened without a role under a parent is
// attached with :mod. Tokens after the root node closes are ignored.
// Throws Unrestorable when no token can head a node.
AmrGraph restore(std::span<const std::string> tokens);

struct SmatchScore;

// Smatch between g (wiki removed) and restore(preprocess(g)), scored with
// the exhaustive matcher when both sides are small enough and hill-climbing
// otherwise.
SmatchScore roundtrip_score(const AmrGraph& g);

AmrGraph strip_wiki(const AmrGraph& g);

}  // namespace xamr

// PENMAN notation: AMR graph value type, parser, canonical serializer and
// structural validation.

#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xamr {

struct Edge {
  std::string source;
  std::string role;  // includes the leading ':'
  std::string target;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Attribute {
  std::string variable;
  std::string role;
  std::string value;  // constant, verbatim (quotes kept)

  friend bool operator==(const Attribute&, const Attribute&) = default;
  friend auto operator<=>(const Attribute&, const Attribute&) = default;
};

// Rooted labeled graph. Edges and attributes keep insertion order; equality
// is order-insensitive (see same_graph).
struct AmrGraph {
  std::string root;
  std::map<std::string, std::string> nodes;  // variable -> concept
  std::vector<Edge> edges;
  std::vector<Attribute> attributes;
};

// True when both graphs have the same root, nodes, and edge/attribute
// multisets under the identity variable mapping.
bool same_graph(const AmrGraph& a, const AmrGraph& b);

class PenmanError : public std::runtime_error {
 public:
  enum class Kind {
    kUnbalancedParens,
    kDuplicateVariable,
    kDanglingReference,
    kEmptyConcept,
    kUnexpectedToken,
  };

  PenmanError(Kind kind, std::size_t offset, const std::string& detail);

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

const char* to_string(PenmanError::Kind kind);

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses one PENMAN expression. Whitespace, including newlines, between
// tokens is insignificant. Inverse roles (":ARG0-of") are normalized to
// forward edges; ":consist-of" is a regular role.
AmrGraph parse_penman(std::string_view input);

// Single-line canonical PENMAN. Children of every node are ordered by
// (role as written, target); each node is declared at its first occurrence
// in that depth-first order and referenced bare afterwards. Nodes reachable
// only against edge direction are emitted with inverse roles.
// Throws InvariantViolation if validate(g) is non-empty.
std::string serialize_penman(const AmrGraph& g);

struct Violation {
  enum class Kind {
    kMissingRoot,
    kDanglingReference,
    kEmptyConcept,
    kBadRole,
    kDisconnected,
  };
  Kind kind;
  std::string message;
};

const char* to_string(Violation::Kind kind);

std::vector<Violation> validate(const AmrGraph& g);

// ---- role helpers shared with linearization ----

// ":ARG0-of" -> (":ARG0", true); ":consist-of" and plain roles -> (role, false).
std::pair<std::string, bool> normalize_role(std::string_view role);

// Constants per PENMAN conventions: quoted strings, numbers, "-" and "+",
// and any token that does not look like a variable.
bool looks_like_variable(std::string_view token);

}  // namespace xamr

#include "xamr/penman.hpp"

#include "graph_walk.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <tuple>

namespace xamr {

namespace {

enum class TokenType { kOpen, kClose, kSlash, kRole, kQuoted, kBare, kEnd };

struct Token {
  TokenType type;
  std::string text;
  std::size_t offset;
};

bool is_delimiter(char c) {
  return std::isspace(static_cast<unsigned char>(c)) || c == '(' ||
         c == ')' || c == '/' || c == '"';
}

class Lexer {
 public:
  explicit Lexer(std::string_view in) : in_(in) {}

  Token next() {
    while (pos_ < in_.size() &&
           std::isspace(static_cast<unsigned char>(in_[pos_])))
      ++pos_;
    if (pos_ >= in_.size()) return {TokenType::kEnd, "", pos_};
    const std::size_t start = pos_;
    const char c = in_[pos_];
    if (c == '(') return ++pos_, Token{TokenType::kOpen, "(", start};
    if (c == ')') return ++pos_, Token{TokenType::kClose, ")", start};
    if (c == '/') return ++pos_, Token{TokenType::kSlash, "/", start};
    if (c == '"') {
      ++pos_;
      while (pos_ < in_.size() && in_[pos_] != '"') {
        if (in_[pos_] == '\\' && pos_ + 1 < in_.size()) ++pos_;
        ++pos_;
      }
      if (pos_ >= in_.size())
        throw PenmanError(PenmanError::Kind::kUnexpectedToken, start,
                          "unterminated string literal");
      ++pos_;
      return {TokenType::kQuoted, std::string(in_.substr(start, pos_ - start)),
              start};
    }
    while (pos_ < in_.size() && !is_delimiter(in_[pos_])) ++pos_;
    std::string text(in_.substr(start, pos_ - start));
    const TokenType type =
        (text.size() > 1 && text[0] == ':') ? TokenType::kRole : TokenType::kBare;
    return {type, std::move(text), start};
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

// Parenthesis balance outside string literals; reports the first excess
// closer or the end of input when openers remain.
void check_balance(std::string_view in) {
  long depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
      continue;
    }
    if (c == '"') quoted = true;
    else if (c == '(') ++depth;
    else if (c == ')' && --depth < 0)
      throw PenmanError(PenmanError::Kind::kUnbalancedParens, i,
                        "unexpected ')'");
  }
  if (depth > 0)
    throw PenmanError(PenmanError::Kind::kUnbalancedParens, in.size(),
                      "missing ')'");
}

struct PendingValue {
  std::string parent;
  std::string role;
  Token value;
};

}  // namespace

PenmanError::PenmanError(Kind kind, std::size_t offset,
                         const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " +
                         std::to_string(offset) + ": " + detail),
      kind_(kind),
      offset_(offset) {}

const char* to_string(PenmanError::Kind kind) {
  switch (kind) {
    case PenmanError::Kind::kUnbalancedParens: return "UnbalancedParens";
    case PenmanError::Kind::kDuplicateVariable: return "DuplicateVariable";
    case PenmanError::Kind::kDanglingReference: return "DanglingReference";
    case PenmanError::Kind::kEmptyConcept: return "EmptyConcept";
    case PenmanError::Kind::kUnexpectedToken: return "UnexpectedToken";
  }
  return "PenmanError";
}

const char* to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kMissingRoot: return "MissingRoot";
    case Violation::Kind::kDanglingReference: return "DanglingReference";
    case Violation::Kind::kEmptyConcept: return "EmptyConcept";
    case Violation::Kind::kBadRole: return "BadRole";
    case Violation::Kind::kDisconnected: return "Disconnected";
  }
  return "Violation";
}

std::pair<std::string, bool> normalize_role(std::string_view role) {
  constexpr std::string_view kSuffix = "-of";
  if (role.size() > kSuffix.size() + 1 && role.ends_with(kSuffix) &&
      role != ":consist-of") {
    return {std::string(role.substr(0, role.size() - kSuffix.size())), true};
  }
  return {std::string(role), false};
}

// One or two letters followed by optional digits: "b", "b2", "xv", "v13".
bool looks_like_variable(std::string_view token) {
  std::size_t letters = 0;
  while (letters < token.size() &&
         std::isalpha(static_cast<unsigned char>(token[letters])))
    ++letters;
  if (letters == 0 || letters > 2) return false;
  return std::all_of(token.begin() + letters, token.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
}

AmrGraph parse_penman(std::string_view input) {
  check_balance(input);

  Lexer lexer(input);
  AmrGraph g;
  std::vector<std::string> open;  // stack of open node variables
  std::optional<Token> role;
  std::vector<PendingValue> values;
  bool finished = false;

  for (Token tok = lexer.next(); tok.type != TokenType::kEnd;
       tok = lexer.next()) {
    if (finished)
      throw PenmanError(PenmanError::Kind::kUnexpectedToken, tok.offset,
                        "trailing content after graph: '" + tok.text + "'");
    switch (tok.type) {
      case TokenType::kOpen: {
        if (!open.empty() && !role)
          throw PenmanError(PenmanError::Kind::kUnexpectedToken, tok.offset,
                            "node without a role");
        Token var = lexer.next();
        if (var.type != TokenType::kBare)
          throw PenmanError(PenmanError::Kind::kUnexpectedToken, var.offset,
                            "expected variable after '('");
        Token slash = lexer.next();
        if (slash.type != TokenType::kSlash)
          throw PenmanError(PenmanError::Kind::kEmptyConcept, slash.offset,
                            "node '" + var.text + "' has no concept_name");
        Token concept_name = lexer.next();
        if (concept_name.type != TokenType::kBare &&
            concept_name.type != TokenType::kQuoted)
          throw PenmanError(PenmanError::Kind::kEmptyConcept, concept_name.offset,
                            "node '" + var.text + "' has no concept_name");
        if (!g.nodes.emplace(var.text, concept_name.text).second)
          throw PenmanError(PenmanError::Kind::kDuplicateVariable, var.offset,
                            "variable '" + var.text + "' declared twice");
        if (open.empty()) {
          g.root = var.text;
        } else {
          auto [name, inverted] = normalize_role(role->text);
          if (inverted)
            g.edges.push_back({var.text, name, open.back()});
          else
            g.edges.push_back({open.back(), name, var.text});
          role.reset();
        }
        open.push_back(var.text);
        break;
      }
      case TokenType::kClose:
        if (role)
          throw PenmanError(PenmanError::Kind::kUnexpectedToken, role->offset,
                            "role '" + role->text + "' has no value");
        open.pop_back();  // balance was checked up front
        finished = open.empty();
        break;
      case TokenType::kRole:
        if (open.empty() || role)
          throw PenmanError(PenmanError::Kind::kUnexpectedToken, tok.offset,
                            "unexpected role '" + tok.text + "'");
        role = tok;
        break;
      case TokenType::kBare:
      case TokenType::kQuoted:
        if (!role)
          throw PenmanError(PenmanError::Kind::kUnexpectedToken, tok.offset,
                            "unexpected token '" + tok.text + "'");
        values.push_back({open.back(), role->text, tok});
        role.reset();
        break;
      case TokenType::kSlash:
        throw PenmanError(PenmanError::Kind::kUnexpectedToken, tok.offset,
                          "unexpected '/'");
      case TokenType::kEnd:
        break;
    }
  }
  if (g.root.empty())
    throw PenmanError(PenmanError::Kind::kUnexpectedToken, 0,
                      "input contains no graph");

  for (const PendingValue& v : values) {
    const bool quoted = v.value.type == TokenType::kQuoted;
    if (!quoted && g.nodes.count(v.value.text)) {
      auto [name, inverted] = normalize_role(v.role);
      if (inverted)
        g.edges.push_back({v.value.text, name, v.parent});
      else
        g.edges.push_back({v.parent, name, v.value.text});
    } else if (!quoted && looks_like_variable(v.value.text)) {
      throw PenmanError(PenmanError::Kind::kDanglingReference, v.value.offset,
                        "variable '" + v.value.text + "' is never declared");
    } else {
      g.attributes.push_back({v.parent, v.role, v.value.text});
    }
  }
  return g;
}

namespace detail {

namespace {

struct Incident {
  std::string role;    // as written at this node
  std::string target;  // variable or constant
  enum class Kind { kEdge, kAttribute } kind;
  std::size_t index;
};

class Walker {
 public:
  Walker(const AmrGraph& g, GraphVisitor& visitor)
      : g_(g), visitor_(visitor), edge_done_(g.edges.size(), false) {
    // Edges leaving a node that forward edges reach from the root are always
    // written at their source; only the rest may appear inverted.
    std::set<std::string> forward{g.root};
    std::vector<std::string> stack{g.root};
    while (!stack.empty()) {
      const std::string v = stack.back();
      stack.pop_back();
      for (const Edge& e : g.edges)
        if (e.source == v && forward.insert(e.target).second) stack.push_back(e.target);
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const Edge& e = g.edges[i];
      incident_[e.source].push_back(
          {e.role, e.target, Incident::Kind::kEdge, i});
      if (e.source != e.target && !forward.count(e.source))
        incident_[e.target].push_back(
            {e.role + "-of", e.source, Incident::Kind::kEdge, i});
    }
    for (std::size_t i = 0; i < g.attributes.size(); ++i) {
      const Attribute& a = g.attributes[i];
      incident_[a.variable].push_back(
          {a.role, a.value, Incident::Kind::kAttribute, i});
    }
    for (auto& [var, items] : incident_) {
      std::stable_sort(items.begin(), items.end(),
                       [](const Incident& a, const Incident& b) {
                         return std::tie(a.role, a.target) <
                                std::tie(b.role, b.target);
                       });
    }
  }

  void visit(const std::string& var) {
    visited_.insert(var);
    visitor_.open_node(var, g_.nodes.at(var));
    auto it = incident_.find(var);
    if (it != incident_.end()) {
      for (const Incident& item : it->second) {
        if (item.kind == Incident::Kind::kEdge) {
          if (edge_done_[item.index]) continue;
          edge_done_[item.index] = true;
        }
        visitor_.role(item.role);
        if (item.kind == Incident::Kind::kAttribute)
          visitor_.constant(item.target);
        else if (visited_.count(item.target))
          visitor_.reference(item.target);
        else
          visit(item.target);
      }
    }
    visitor_.close_node();
  }

 private:
  const AmrGraph& g_;
  GraphVisitor& visitor_;
  std::map<std::string, std::vector<Incident>> incident_;
  std::vector<bool> edge_done_;
  std::set<std::string> visited_;
};

}  // namespace

void walk_graph(const AmrGraph& g, GraphVisitor& visitor) {
  Walker(g, visitor).visit(g.root);
}

}  // namespace detail

namespace {

class PenmanWriter : public detail::GraphVisitor {
 public:
  void open_node(const std::string& var, const std::string& concept_name) override {
    out += '(';
    out += var;
    out += " / ";
    out += concept_name;
  }
  void role(const std::string& role) override {
    out += ' ';
    out += role;
    out += ' ';
  }
  void constant(const std::string& value) override { out += value; }
  void reference(const std::string& var) override { out += var; }
  void close_node() override { out += ')'; }

  std::string out;
};

}  // namespace

std::string serialize_penman(const AmrGraph& g) {
  if (auto violations = validate(g); !violations.empty())
    throw InvariantViolation("cannot serialize malformed graph: " +
                             violations.front().message);
  PenmanWriter writer;
  detail::walk_graph(g, writer);
  return std::move(writer.out);
}

std::vector<Violation> validate(const AmrGraph& g) {
  std::vector<Violation> out;
  auto bad_role = [](const std::string& r) {
    return r.size() < 2 || r[0] != ':';
  };
  if (g.root.empty() || !g.nodes.count(g.root))
    out.push_back({Violation::Kind::kMissingRoot,
                   "root '" + g.root + "' is not a declared node"});
  for (const auto& [var, concept_name] : g.nodes) {
    if (concept_name.empty())
      out.push_back({Violation::Kind::kEmptyConcept,
                     "node '" + var + "' has an empty concept_name"});
  }
  std::map<std::string, std::vector<std::string>> adjacent;
  for (const Edge& e : g.edges) {
    for (const std::string* v : {&e.source, &e.target}) {
      if (!g.nodes.count(*v))
        out.push_back({Violation::Kind::kDanglingReference,
                       "edge endpoint '" + *v + "' is not a declared node"});
    }
    if (bad_role(e.role))
      out.push_back({Violation::Kind::kBadRole, "bad role '" + e.role + "'"});
    adjacent[e.source].push_back(e.target);
    adjacent[e.target].push_back(e.source);
  }
  for (const Attribute& a : g.attributes) {
    if (!g.nodes.count(a.variable))
      out.push_back({Violation::Kind::kDanglingReference,
                     "attribute owner '" + a.variable +
                         "' is not a declared node"});
    if (bad_role(a.role))
      out.push_back({Violation::Kind::kBadRole, "bad role '" + a.role + "'"});
  }
  if (g.nodes.count(g.root)) {
    std::set<std::string> seen{g.root};
    std::vector<std::string> frontier{g.root};
    while (!frontier.empty()) {
      std::string v = std::move(frontier.back());
      frontier.pop_back();
      for (const std::string& w : adjacent[v]) {
        if (g.nodes.count(w) && seen.insert(w).second) frontier.push_back(w);
      }
    }
    if (seen.size() != g.nodes.size())
      out.push_back({Violation::Kind::kDisconnected,
                     std::to_string(g.nodes.size() - seen.size()) +
                         " node(s) unreachable from root"});
  }
  return out;
}

bool same_graph(const AmrGraph& a, const AmrGraph& b) {
  if (a.root != b.root || a.nodes != b.nodes) return false;
  auto sorted = [](auto v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  return sorted(a.edges) == sorted(b.edges) &&
         sorted(a.attributes) == sorted(b.attributes);
}

}  // namespace xamr

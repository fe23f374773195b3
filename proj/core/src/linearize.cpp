#include "xamr/linearize.hpp"

#include <cctype>
#include <optional>

#include "graph_walk.hpp"
#include "xamr/smatch.hpp"

namespace xamr {

namespace {

constexpr std::string_view kWikiRole = ":wiki";

std::string one_token(const std::string& value) {
  std::string out = value;
  for (char& c : out)
    if (std::isspace(static_cast<unsigned char>(c))) c = '_';
  return out;
}

class Linearizer : public detail::GraphVisitor {
 public:
  explicit Linearizer(const AmrGraph& g) : g_(g) {}

  void open_node(const std::string&, const std::string& concept_name) override {
    tokens.emplace_back("(");
    tokens.push_back(one_token(concept_name));
  }
  void role(const std::string& role) override { tokens.push_back(role); }
  void constant(const std::string& value) override {
    tokens.push_back(one_token(value));
  }
  void reference(const std::string& var) override {
    tokens.emplace_back("(");
    tokens.push_back(one_token(g_.nodes.at(var)));
    tokens.emplace_back(")");
  }
  void close_node() override { tokens.emplace_back(")"); }

  std::vector<std::string> tokens;

 private:
  const AmrGraph& g_;
};

bool is_role(const std::string& tok) { return tok.size() > 1 && tok[0] == ':'; }

}  // namespace

std::string LinearizedAmr::text() const {
  std::string out;
  for (const std::string& tok : tokens) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

std::vector<std::string> tokenize_linearized(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')') {
      out.emplace_back(1, c);
      ++i;
    } else if (c == '"') {
      std::size_t end = text.find('"', i + 1);
      end = end == std::string_view::npos ? text.size() : end + 1;
      out.emplace_back(text.substr(i, end - i));
      i = end;
    } else {
      std::size_t end = i;
      while (end < text.size() &&
             !std::isspace(static_cast<unsigned char>(text[end])) &&
             text[end] != '(' && text[end] != ')')
        ++end;
      out.emplace_back(text.substr(i, end - i));
      i = end;
    }
  }
  return out;
}

AmrGraph strip_wiki(const AmrGraph& g) {
  AmrGraph out = g;
  std::erase_if(out.attributes,
                [](const Attribute& a) { return a.role == kWikiRole; });
  return out;
}

LinearizedAmr preprocess(const AmrGraph& g) {
  if (auto violations = validate(g); !violations.empty())
    throw InvariantViolation("cannot linearize malformed graph: " +
                             violations.front().message);
  const AmrGraph clean = strip_wiki(g);
  Linearizer lin(clean);
  detail::walk_graph(clean, lin);
  return {std::move(lin.tokens)};
}

AmrGraph restore(std::span<const std::string> tokens) {
  AmrGraph g;
  std::vector<std::string> open;
  std::optional<std::string> pending_role;
  bool pending_open = false;
  int next_var = 0;

  auto new_node = [&](const std::string& concept_name) {
    std::string var = "v" + std::to_string(next_var++);
    g.nodes.emplace(var, concept_name);
    if (open.empty()) {
      g.root = var;
    } else {
      auto [name, inverted] = normalize_role(pending_role.value_or(":mod"));
      if (inverted)
        g.edges.push_back({var, name, open.back()});
      else
        g.edges.push_back({open.back(), name, var});
    }
    pending_role.reset();
    open.push_back(std::move(var));
  };

  for (const std::string& tok : tokens) {
    if (tok == "(") {
      pending_open = true;
    } else if (tok == ")") {
      pending_role.reset();
      if (pending_open) {
        pending_open = false;
      } else if (!open.empty()) {
        open.pop_back();
        if (open.empty()) break;
      }
    } else if (is_role(tok)) {
      pending_open = false;
      if (!open.empty()) pending_role = tok;
    } else if (tok.empty()) {
      continue;
    } else if (pending_open) {
      pending_open = false;
      new_node(tok);
    } else if (open.empty() && g.root.empty()) {
      new_node(tok);
    } else if (pending_role && !open.empty()) {
      g.attributes.push_back({open.back(), *pending_role, tok});
      pending_role.reset();
    }
  }
  if (g.root.empty())
    throw Unrestorable("no token can head a node");
  return g;
}

SmatchScore roundtrip_score(const AmrGraph& g) {
  const AmrGraph source = strip_wiki(g);
  const LinearizedAmr lin = preprocess(source);
  const AmrGraph restored = restore(lin.tokens);
  if (restored.nodes.size() <= kExactSmatchMaxVariables &&
      source.nodes.size() <= kExactSmatchMaxVariables)
    return compute_smatch_exact(restored, source);
  return compute_smatch(restored, source, {.restarts = 8, .seed = 0});
}

}  // namespace xamr

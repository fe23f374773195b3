// Independent reference computations used to check the library.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "xamr/penman.hpp"

namespace xamr::testing {

// Triples as string tuples over raw variable names; kind tags separate the
// three triple families.
using StringTriple = std::tuple<std::string, std::string, std::string, std::string>;

inline std::set<StringTriple> string_triples(const AmrGraph& g) {
  std::set<StringTriple> out;
  for (const auto& [v, c] : g.nodes) out.insert({"instance", v, c, ""});
  for (const Edge& e : g.edges) out.insert({"relation", e.role, e.source, e.target});
  for (const Attribute& a : g.attributes) out.insert({"attribute", a.role, a.variable, a.value});
  out.insert({"attribute", "TOP", g.root, "top"});
  return out;
}

struct OracleScore {
  long matched = 0;
  long total_left = 0;
  long total_right = 0;
};

// Best matched count over every injective partial mapping of candidate
// variables to gold variables, by plain enumeration.
inline OracleScore brute_force_smatch(const AmrGraph& cand, const AmrGraph& gold) {
  const auto left = string_triples(cand);
  const auto right = string_triples(gold);
  std::vector<std::string> lv, rv;
  for (const auto& [v, c] : cand.nodes) lv.push_back(v);
  for (const auto& [v, c] : gold.nodes) rv.push_back(v);

  std::map<std::string, std::string> mapping;
  std::set<std::string> used;
  long best = 0;
  auto count = [&] {
    auto m = [&](const std::string& v) -> std::string {
      auto it = mapping.find(v);
      return it == mapping.end() ? "\x01unmapped" : it->second;
    };
    long hits = 0;
    for (const auto& [kind, a, b, c] : left) {
      StringTriple t;
      if (kind == "instance") t = {kind, m(a), b, c};
      else if (kind == "relation") t = {kind, a, m(b), m(c)};
      else t = {kind, a, m(b), c};
      hits += right.count(t) ? 1 : 0;
    }
    return hits;
  };
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == lv.size()) {
      best = std::max(best, count());
      return;
    }
    rec(i + 1);  // leave lv[i] unmapped
    for (const std::string& r : rv) {
      if (used.count(r)) continue;
      used.insert(r);
      mapping[lv[i]] = r;
      rec(i + 1);
      mapping.erase(lv[i]);
      used.erase(r);
    }
  };
  rec(0);
  return {best, static_cast<long>(left.size()), static_cast<long>(right.size())};
}

inline bool is_tree(const AmrGraph& g) {
  std::map<std::string, int> indegree;
  for (const Edge& e : g.edges) ++indegree[e.target];
  if (indegree.count(g.root)) return false;
  for (const auto& [v, c] : g.nodes)
    if (v != g.root && indegree[v] != 1) return false;
  return true;
}

}  // namespace xamr::testing

#include "xamr/smatch.hpp"

#include <algorithm>
#include <unordered_map>

#include "xamr/parallel.hpp"
#include "xamr/random.hpp"

namespace xamr {

template <typename T>
static void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

TripleSet extract_triples(const AmrGraph& g) {
  TripleSet t;
  std::map<std::string, int> index;
  for (const auto& [var, concept_name] : g.nodes) {
    index.emplace(var, static_cast<int>(t.variables.size()));
    t.variables.push_back(var);
    t.instances.emplace_back(index[var], concept_name);
  }
  for (const Edge& e : g.edges)
    t.relations.emplace_back(e.role, index.at(e.source), index.at(e.target));
  for (const Attribute& a : g.attributes)
    t.attributes.emplace_back(a.role, index.at(a.variable), a.value);
  t.attributes.emplace_back(kTopRole, index.at(g.root), kTopValue);
  sort_unique(t.instances);
  sort_unique(t.relations);
  sort_unique(t.attributes);
  return t;
}

int score_mapping(const TripleSet& left, const TripleSet& right,
                  const VariableMapping& mapping) {
  auto mapped = [&](int v) {
    return v < static_cast<int>(mapping.size()) ? mapping[v] : -1;
  };
  int matched = 0;
  for (const auto& [v, concept_name] : left.instances) {
    const int w = mapped(v);
    if (w >= 0 && std::binary_search(right.instances.begin(),
                                      right.instances.end(),
                                      std::make_pair(w, concept_name)))
      ++matched;
  }
  for (const auto& [role, a, b] : left.relations) {
    const int c = mapped(a), d = mapped(b);
    if (c >= 0 && d >= 0 &&
        std::binary_search(right.relations.begin(), right.relations.end(),
                           std::make_tuple(role, c, d)))
      ++matched;
  }
  for (const auto& [role, v, value] : left.attributes) {
    const int w = mapped(v);
    if (w >= 0 && std::binary_search(right.attributes.begin(),
                                      right.attributes.end(),
                                      std::make_tuple(role, w, value)))
      ++matched;
  }
  return matched;
}

SmatchScore make_score(long matched, long total_left, long total_right) {
  SmatchScore s;
  s.matched = matched;
  s.total_left = total_left;
  s.total_right = total_right;
  s.precision = total_left > 0 ? static_cast<double>(matched) / total_left : 0.0;
  s.recall = total_right > 0 ? static_cast<double>(matched) / total_right : 0.0;
  s.f1 = (s.precision + s.recall) > 0
             ? 2 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

namespace {

// Pairwise match potential between left variable i and right variable j.
// `node` counts instance, attribute and self-loop triples that match when
// i -> j; `links` lists (i2, j2) such that one relation triple matches when
// both i -> j and i2 -> j2.
class MatchTables {
 public:
  struct Link {
    int other_left;
    int other_right;
  };

  MatchTables(const TripleSet& left, const TripleSet& right)
      : n_(static_cast<int>(left.variables.size())),
        m_(static_cast<int>(right.variables.size())),
        node_(static_cast<std::size_t>(n_) * m_, 0),
        links_(static_cast<std::size_t>(n_) * m_) {
    std::unordered_map<std::string, std::vector<int>> by_concept;
    for (const auto& [j, concept_name] : right.instances)
      by_concept[concept_name].push_back(j);
    for (const auto& [i, concept_name] : left.instances) {
      auto it = by_concept.find(concept_name);
      if (it == by_concept.end()) continue;
      for (int j : it->second) ++node_[at(i, j)];
    }

    std::map<std::pair<std::string, std::string>, std::vector<int>> by_attr;
    for (const auto& [role, j, value] : right.attributes)
      by_attr[{role, value}].push_back(j);
    for (const auto& [role, i, value] : left.attributes) {
      auto it = by_attr.find({role, value});
      if (it == by_attr.end()) continue;
      for (int j : it->second) ++node_[at(i, j)];
    }

    std::unordered_map<std::string, std::vector<std::pair<int, int>>> by_role;
    for (const auto& [role, c, d] : right.relations)
      by_role[role].emplace_back(c, d);
    for (const auto& [role, a, b] : left.relations) {
      auto it = by_role.find(role);
      if (it == by_role.end()) continue;
      for (const auto& [c, d] : it->second) {
        if ((a == b) != (c == d)) continue;
        if (a == b) {
          ++node_[at(a, c)];
        } else {
          links_[at(a, c)].push_back({b, d});
          links_[at(b, d)].push_back({a, c});
        }
      }
    }
  }

  int left_size() const { return n_; }
  int right_size() const { return m_; }

  int node(int i, int j) const { return j < 0 ? 0 : node_[at(i, j)]; }

  const std::vector<Link>& links(int i, int j) const {
    static const std::vector<Link> kNone;
    return j < 0 ? kNone : links_[at(i, j)];
  }

  bool has_potential(int i, int j) const {
    return node_[at(i, j)] > 0 || !links_[at(i, j)].empty();
  }

  // Triples matched by i -> j together with the current mapping of every
  // other variable except `excluded`.
  int contribution(const VariableMapping& map, int i, int j,
                   int excluded) const {
    if (j < 0) return 0;
    int total = node_[at(i, j)];
    for (const Link& l : links_[at(i, j)])
      if (l.other_left != excluded && map[l.other_left] == l.other_right)
        ++total;
    return total;
  }

  // Relation triples linking i -> j with k -> jk.
  int pair_term(int i, int j, int k, int jk) const {
    if (j < 0 || jk < 0) return 0;
    int total = 0;
    for (const Link& l : links_[at(i, j)])
      if (l.other_left == k && l.other_right == jk) ++total;
    return total;
  }

  int total(const VariableMapping& map) const {
    int nodes = 0, links = 0;
    for (int i = 0; i < n_; ++i) {
      if (map[i] < 0) continue;
      nodes += node_[at(i, map[i])];
      for (const Link& l : links_[at(i, map[i])])
        if (map[l.other_left] == l.other_right) ++links;
    }
    return nodes + links / 2;
  }

 private:
  std::size_t at(int i, int j) const {
    return static_cast<std::size_t>(i) * m_ + j;
  }

  int n_, m_;
  std::vector<int> node_;
  std::vector<std::vector<Link>> links_;
};

class HillClimber {
 public:
  explicit HillClimber(const MatchTables& t) : t_(t) {}

  VariableMapping greedy_start() const {
    VariableMapping map(t_.left_size(), -1);
    std::vector<bool> used(t_.right_size(), false);
    for (int i = 0; i < t_.left_size(); ++i) {
      int best = -1, best_weight = 0;
      for (int j = 0; j < t_.right_size(); ++j) {
        if (!used[j] && t_.node(i, j) > best_weight) {
          best = j;
          best_weight = t_.node(i, j);
        }
      }
      if (best >= 0) {
        map[i] = best;
        used[best] = true;
      }
    }
    return map;
  }

  VariableMapping random_start(Rng& rng) const {
    VariableMapping map(t_.left_size(), -1);
    std::vector<bool> used(t_.right_size(), false);
    std::vector<int> options;
    for (int i = 0; i < t_.left_size(); ++i) {
      options.clear();
      for (int j = 0; j < t_.right_size(); ++j)
        if (!used[j] && t_.has_potential(i, j)) options.push_back(j);
      if (options.empty()) continue;
      map[i] = options[uniform_index(rng, options.size())];
      used[map[i]] = true;
    }
    return map;
  }

  // Steepest ascent over single-variable reassignments and swaps; the first
  // best move in (left, right) index order wins ties.
  void climb(VariableMapping& map) const {
    const int n = t_.left_size(), m = t_.right_size();
    std::vector<int> owner(m, -1);
    for (int i = 0; i < n; ++i)
      if (map[i] >= 0) owner[map[i]] = i;
    for (;;) {
      int best_gain = 0, best_i = -1, best_j = -2;
      for (int i = 0; i < n; ++i) {
        for (int j = -1; j < m; ++j) {
          if (j == map[i]) continue;
          const int k = j < 0 ? -1 : owner[j];
          const int gain = k < 0 ? reassign_gain(map, i, j) : swap_gain(map, i, k);
          if (gain > best_gain) {
            best_gain = gain;
            best_i = i;
            best_j = j;
          }
        }
      }
      if (best_gain <= 0) return;
      const int old = map[best_i];
      const int k = best_j < 0 ? -1 : owner[best_j];
      if (k >= 0) {
        map[k] = old;
        if (old >= 0) owner[old] = k;
      } else if (old >= 0) {
        owner[old] = -1;
      }
      map[best_i] = best_j;
      if (best_j >= 0) owner[best_j] = best_i;
    }
  }

 private:
  int reassign_gain(const VariableMapping& map, int i, int j) const {
    return t_.contribution(map, i, j, -1) - t_.contribution(map, i, map[i], -1);
  }

  int swap_gain(const VariableMapping& map, int i, int k) const {
    const int a = map[i], b = map[k];
    const int before = t_.contribution(map, i, a, k) +
                       t_.contribution(map, k, b, i) + t_.pair_term(i, a, k, b);
    const int after = t_.contribution(map, i, b, k) +
                      t_.contribution(map, k, a, i) + t_.pair_term(i, b, k, a);
    return after - before;
  }

  const MatchTables& t_;
};

class ExhaustiveSearch {
 public:
  explicit ExhaustiveSearch(const MatchTables& t)
      : t_(t),
        map_(t.left_size(), -1),
        used_(t.right_size(), false),
        best_map_(map_) {}

  VariableMapping run() {
    descend(0, 0);
    return best_map_;
  }

 private:
  void descend(int i, int score) {
    if (i == t_.left_size()) {
      if (score > best_) {
        best_ = score;
        best_map_ = map_;
      }
      return;
    }
    descend(i + 1, score);
    for (int j = 0; j < t_.right_size(); ++j) {
      if (used_[j]) continue;
      int gain = t_.node(i, j);
      for (const auto& l : t_.links(i, j))
        if (l.other_left < i && map_[l.other_left] == l.other_right) ++gain;
      used_[j] = true;
      map_[i] = j;
      descend(i + 1, score + gain);
      map_[i] = -1;
      used_[j] = false;
    }
  }

  const MatchTables& t_;
  VariableMapping map_;
  std::vector<bool> used_;
  int best_ = -1;
  VariableMapping best_map_;
};

SmatchScore finish(const TripleSet& left, const TripleSet& right,
                   const VariableMapping& map, int matched) {
  SmatchScore s = make_score(matched, static_cast<long>(left.size()),
                             static_cast<long>(right.size()));
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map[i] >= 0) s.mapping[left.variables[i]] = right.variables[map[i]];
  return s;
}

}  // namespace

SmatchScore compute_smatch(const AmrGraph& candidate, const AmrGraph& gold,
                           const SmatchOptions& options) {
  if (options.restarts < 1)
    throw std::invalid_argument("smatch restarts must be >= 1");
  const TripleSet left = extract_triples(candidate);
  const TripleSet right = extract_triples(gold);
  const MatchTables tables(left, right);
  const HillClimber climber(tables);
  Rng rng(options.seed);

  VariableMapping best_map;
  int best = -1;
  for (int r = 0; r < options.restarts; ++r) {
    VariableMapping map = r == 0 ? climber.greedy_start() : climber.random_start(rng);
    climber.climb(map);
    const int score = tables.total(map);
    if (score > best) {
      best = score;
      best_map = std::move(map);
    }
  }
  return finish(left, right, best_map, best);
}

SmatchScore compute_smatch_exact(const AmrGraph& candidate,
                                 const AmrGraph& gold) {
  if (candidate.nodes.size() > kExactSmatchMaxVariables ||
      gold.nodes.size() > kExactSmatchMaxVariables)
    throw SmatchTooLarge("exact smatch supports at most " +
                         std::to_string(kExactSmatchMaxVariables) +
                         " variables per graph");
  const TripleSet left = extract_triples(candidate);
  const TripleSet right = extract_triples(gold);
  const MatchTables tables(left, right);
  VariableMapping map = ExhaustiveSearch(tables).run();
  return finish(left, right, map, tables.total(map));
}

CorpusSmatch corpus_smatch(const std::vector<GraphPair>& pairs,
                           const SmatchOptions& options, unsigned threads) {
  if (pairs.empty()) throw EmptyCorpus("corpus smatch over an empty corpus");
  CorpusSmatch out;
  out.pairs.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    SmatchOptions pair_options = options;
    pair_options.seed = derive_seed(options.seed, i);
    out.pairs[i] =
        compute_smatch(*pairs[i].candidate, *pairs[i].gold, pair_options);
  });
  long matched = 0, left = 0, right = 0;
  for (const SmatchScore& s : out.pairs) {
    matched += s.matched;
    left += s.total_left;
    right += s.total_right;
  }
  out.total = make_score(matched, left, right);
  return out;
}

}  // namespace xamr

#include <gtest/gtest.h>

#include <set>

#include "generators.hpp"
#include "oracles.hpp"
#include "xamr/smatch.hpp"

namespace xamr {
namespace {

AmrGraph g(const char* text) { return parse_penman(text); }

TEST(ExtractTriples, Counts) {
  EXPECT_EQ(extract_triples(g("(d / dog)")).size(), 2u);
  EXPECT_EQ(extract_triples(g("(e / eat-01 :ARG0 (d / dog) :ARG1 (b / bone))")).size(), 6u);
  const TripleSet t = extract_triples(g("(g / go-02 :polarity -)"));
  const auto want = std::make_tuple(std::string(":polarity"), 0, std::string("-"));
  EXPECT_NE(std::find(t.attributes.begin(), t.attributes.end(), want), t.attributes.end());
}

TEST(ScoreMapping, Examples) {
  const TripleSet eat = extract_triples(g("(e / eat-01 :ARG0 (d / dog) :ARG1 (b / bone))"));
  VariableMapping identity(eat.variables.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  EXPECT_EQ(score_mapping(eat, eat, identity), 6);
  EXPECT_EQ(score_mapping(eat, eat, VariableMapping(eat.variables.size(), -1)), 0);

  const TripleSet dog = extract_triples(g("(a / dog)"));
  const TripleSet cat = extract_triples(g("(b / cat)"));
  EXPECT_EQ(score_mapping(dog, cat, {0}), 1);
}

TEST(ComputeSmatch, Examples) {
  const SmatchScore self = compute_smatch(g("(e / eat-01 :ARG0 (d / dog))"),
                                          g("(e / eat-01 :ARG0 (d / dog))"));
  EXPECT_DOUBLE_EQ(self.f1, 1.0);
  EXPECT_EQ(self.matched, self.total_left);

  const SmatchScore dc = compute_smatch(g("(a / dog)"), g("(b / cat)"));
  EXPECT_DOUBLE_EQ(dc.precision, 0.5);
  EXPECT_DOUBLE_EQ(dc.recall, 0.5);
  EXPECT_DOUBLE_EQ(dc.f1, 0.5);

  const AmrGraph l = g("(e / eat-01 :ARG0 (d / dog))"), r = g("(e2 / eat-01 :ARG0 (c / cat))");
  const SmatchScore s = compute_smatch(l, r);
  EXPECT_EQ(s.matched, 3);
  EXPECT_EQ(s.total_left, 4);
  EXPECT_DOUBLE_EQ(s.f1, 0.75);
  const SmatchScore exact = compute_smatch_exact(l, r);
  EXPECT_EQ(exact.matched, s.matched);
  EXPECT_EQ(s.mapping.at("e"), "e2");
}

TEST(ComputeSmatch, DisjointConceptsMatchOnlyTop) {
  const SmatchScore s = compute_smatch_exact(g("(a / dog :ARG0 (b / cat))"),
                                             g("(x / sun :mod (y / moon))"));
  EXPECT_EQ(s.matched, 1);
}

TEST(ComputeSmatch, RejectsZeroRestarts) {
  EXPECT_THROW(compute_smatch(g("(a / dog)"), g("(a / dog)"), {.restarts = 0}),
               std::invalid_argument);
}

TEST(ExactSmatch, AgreesWithBruteForceOracle) {
  Rng rng(41);
  for (int i = 0; i < 150; ++i) {
    const AmrGraph a = testing::random_graph(rng, {.max_vars = 5});
    const AmrGraph b = testing::random_graph(rng, {.max_vars = 5});
    const testing::OracleScore o = testing::brute_force_smatch(a, b);
    const SmatchScore s = compute_smatch_exact(a, b);
    EXPECT_EQ(s.matched, o.matched);
    EXPECT_EQ(s.total_left, o.total_left);
    EXPECT_EQ(s.total_right, o.total_right);
  }
}

TEST(ExactSmatch, TooLarge) {
  Rng rng(1);
  const AmrGraph big = testing::random_graph(rng, {.min_vars = 9, .max_vars = 9});
  EXPECT_THROW(compute_smatch_exact(big, big), SmatchTooLarge);
}

TEST(ComputeSmatch, NeverExceedsExactAndMappingIsInjective) {
  Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    const AmrGraph a = testing::random_graph(rng, {.max_vars = 7});
    const AmrGraph b = testing::random_graph(rng, {.max_vars = 7});
    const SmatchScore h = compute_smatch(a, b, {.restarts = 4, .seed = static_cast<std::uint64_t>(i)});
    EXPECT_LE(h.matched, compute_smatch_exact(a, b).matched);
    std::set<std::string> targets;
    for (const auto& [from, to] : h.mapping) EXPECT_TRUE(targets.insert(to).second);
  }
}

TEST(ComputeSmatch, SymmetryAndReflexivity) {
  Rng rng(47);
  for (int i = 0; i < 100; ++i) {
    const AmrGraph a = testing::random_graph(rng, {.max_vars = 10});
    const AmrGraph b = testing::random_graph(rng, {.max_vars = 10});
    EXPECT_DOUBLE_EQ(compute_smatch(a, a).f1, 1.0);
    if (a.nodes.size() <= 8 && b.nodes.size() <= 8) {
      const SmatchScore x = compute_smatch_exact(a, b), y = compute_smatch_exact(b, a);
      EXPECT_EQ(x.precision, y.recall);
      EXPECT_EQ(x.recall, y.precision);
      EXPECT_EQ(x.f1, y.f1);
    }
  }
}

TEST(ComputeSmatch, RemovingCandidateTripleNeverHelps) {
  Rng rng(53);
  for (int i = 0; i < 100; ++i) {
    const AmrGraph gold = testing::random_graph(rng, {.max_vars = 6});
    AmrGraph cand = testing::random_graph(rng, {.max_vars = 6});
    const long before = compute_smatch_exact(cand, gold).matched;
    if (!cand.attributes.empty()) cand.attributes.pop_back();
    else if (cand.edges.size() > cand.nodes.size() - 1) cand.edges.pop_back();
    else continue;
    EXPECT_LE(compute_smatch_exact(cand, gold).matched, before);
  }
}

TEST(ComputeSmatch, SeedDeterministic) {
  Rng rng(59);
  const AmrGraph a = testing::random_graph(rng, {.min_vars = 12, .max_vars = 12});
  const AmrGraph b = testing::random_graph(rng, {.min_vars = 12, .max_vars = 12});
  const SmatchScore x = compute_smatch(a, b, {.restarts = 4, .seed = 9});
  const SmatchScore y = compute_smatch(a, b, {.restarts = 4, .seed = 9});
  EXPECT_EQ(x.matched, y.matched);
  EXPECT_EQ(x.mapping, y.mapping);
}

TEST(MakeScore, ZeroDenominators) {
  const SmatchScore s = make_score(0, 0, 0);
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_EQ(make_score(0, 3, 4).f1, 0.0);
}

TEST(CorpusSmatch, MicroAverage) {
  // (3 of 4, 4) and (1 of 2, 2) -> 4/6.
  const AmrGraph a1 = g("(e / eat-01 :ARG0 (d / dog))"), b1 = g("(e / eat-01 :ARG0 (c / cat))");
  const AmrGraph a2 = g("(a / dog)"), b2 = g("(b / cat)");
  const CorpusSmatch c = corpus_smatch({{&a1, &b1}, {&a2, &b2}});
  EXPECT_EQ(c.total.matched, 4);
  EXPECT_EQ(c.total.total_left, 6);
  EXPECT_DOUBLE_EQ(c.total.precision, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(c.total.f1, 2.0 / 3.0);
  ASSERT_EQ(c.pairs.size(), 2u);

  const CorpusSmatch one = corpus_smatch({{&a1, &b1}});
  EXPECT_EQ(one.total.f1, compute_smatch(a1, b1).f1);
  EXPECT_THROW(corpus_smatch({}), EmptyCorpus);
}

TEST(CorpusSmatch, ThreadCountDoesNotChangeResult) {
  Rng rng(61);
  std::vector<AmrGraph> graphs;
  for (int i = 0; i < 40; ++i)
    graphs.push_back(testing::random_graph(rng, {.min_vars = 6, .max_vars = 14}));
  std::vector<GraphPair> pairs;
  for (int i = 0; i + 1 < 40; i += 2) pairs.push_back({&graphs[i], &graphs[i + 1]});
  const CorpusSmatch serial = corpus_smatch(pairs, {.restarts = 3, .seed = 5}, 1);
  const CorpusSmatch parallel = corpus_smatch(pairs, {.restarts = 3, .seed = 5}, 4);
  EXPECT_EQ(serial.total.matched, parallel.total.matched);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    EXPECT_EQ(serial.pairs[i].mapping, parallel.pairs[i].mapping);
}

}  // namespace
}  // namespace xamr

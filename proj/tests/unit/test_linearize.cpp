#include <gtest/gtest.h>

#include <regex>

#include "generators.hpp"
#include "oracles.hpp"
#include "xamr/linearize.hpp"
#include "xamr/smatch.hpp"

namespace xamr {
namespace {

std::string lin(const std::string& penman) { return preprocess(parse_penman(penman)).text(); }

AmrGraph restore_text(const std::string& text) { return restore(tokenize_linearized(text)); }

TEST(Preprocess, Examples) {
  EXPECT_EQ(lin("(d / dog)"), "( dog )");
  EXPECT_EQ(lin("(e / eat-01 :wiki - :ARG0 (d / dog))"), "( eat-01 :ARG0 ( dog ) )");
  EXPECT_EQ(lin("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))"),
            "( want-01 :ARG0 ( boy ) :ARG1 ( go-02 :ARG0 ( boy ) ) )");
}

TEST(Preprocess, ConstantsStayAndWhitespaceIsJoined) {
  EXPECT_EQ(lin("(g / go-02 :polarity - :name \"Le Petit\")"),
            "( go-02 :name \"Le_Petit\" :polarity - )");
}

TEST(Preprocess, NoVariablesOrWiki) {
  Rng rng(3);
  const std::regex variable("^[a-z]{1,2}[0-9]*$");
  for (int i = 0; i < 200; ++i) {
    AmrGraph g = testing::random_graph(rng, {.max_vars = 8});
    g.attributes.push_back({g.root, ":wiki", "\"Q1\""});
    for (const std::string& tok : preprocess(g).tokens) {
      EXPECT_NE(tok, ":wiki");
      // Concept names in the test pool are longer than two letters.
      EXPECT_FALSE(std::regex_match(tok, variable)) << tok;
    }
  }
}

TEST(Preprocess, RejectsMalformedGraph) {
  AmrGraph g;
  g.root = "q";
  EXPECT_THROW(preprocess(g), InvariantViolation);
}

TEST(Tokenize, SplitsGluedParentheses) {
  EXPECT_EQ(tokenize_linearized("(dog :quant 3)"),
            (std::vector<std::string>{"(", "dog", ":quant", "3", ")"}));
  EXPECT_EQ(tokenize_linearized("( a :name \"x y\" )"),
            (std::vector<std::string>{"(", "a", ":name", "\"x y\"", ")"}));
}

TEST(Restore, Examples) {
  EXPECT_EQ(serialize_penman(restore_text("( dog )")), "(v0 / dog)");
  const AmrGraph repaired = restore_text("( eat-01 :ARG0 ( dog )");
  EXPECT_TRUE(validate(repaired).empty());
  EXPECT_EQ(serialize_penman(repaired), "(v0 / eat-01 :ARG0 (v1 / dog))");
  const AmrGraph stray = restore_text(":ARG0 ) dog");
  EXPECT_TRUE(validate(stray).empty());
  EXPECT_EQ(serialize_penman(stray), "(v0 / dog)");
}

TEST(Restore, KeepsDuplicateCopies) {
  const AmrGraph g = restore_text("( want-01 :ARG0 ( boy ) :ARG1 ( go-02 :ARG0 ( boy ) ) )");
  EXPECT_EQ(g.nodes.size(), 4u);
}

TEST(Restore, InverseRolesAndDefaults) {
  const AmrGraph g = restore_text("( boy :ARG0-of ( go-02 ) ( tall ) :polarity - )");
  EXPECT_EQ(g.edges,
            (std::vector<Edge>{{"v1", ":ARG0", "v0"}, {"v0", ":mod", "v2"}}));
  EXPECT_EQ(g.attributes, (std::vector<Attribute>{{"v0", ":polarity", "-"}}));
}

TEST(Restore, IgnoresTokensAfterRootCloses) {
  const AmrGraph g = restore_text("( dog ) ( cat )");
  EXPECT_EQ(g.nodes.size(), 1u);
}

TEST(Restore, UnrestorableWithoutConcepts) {
  EXPECT_THROW(restore_text(""), Unrestorable);
  EXPECT_THROW(restore_text("( ) :ARG0 ) ("), Unrestorable);
}

TEST(Restore, TotalOverFuzz) {
  Rng rng(19);
  for (int i = 0; i < 3000; ++i) {
    const auto tokens = testing::fuzz_tokens(rng, 25);
    try {
      const AmrGraph g = restore(tokens);
      EXPECT_TRUE(validate(g).empty());
      EXPECT_NO_THROW(serialize_penman(g));
    } catch (const Unrestorable&) {
    }
  }
}

TEST(RoundTrip, TreesAreLossless) {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const AmrGraph g = testing::random_tree(rng, 8);
    ASSERT_TRUE(testing::is_tree(g));
    EXPECT_DOUBLE_EQ(roundtrip_score(g).f1, 1.0) << serialize_penman(g);
  }
  EXPECT_DOUBLE_EQ(roundtrip_score(parse_penman("(d / dog)")).f1, 1.0);
}

TEST(RoundTrip, ReentrancyCostMatchesTripleCount) {
  const AmrGraph g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))");
  const AmrGraph restored = restore(preprocess(g).tokens);
  const testing::OracleScore oracle = testing::brute_force_smatch(restored, g);
  // Restored: 4 instances, 3 relations, TOP. Gold: 3 instances, 3 relations, TOP.
  EXPECT_EQ(oracle.total_left, 8);
  EXPECT_EQ(oracle.total_right, 7);
  EXPECT_EQ(oracle.matched, 6);
  const SmatchScore s = roundtrip_score(g);
  EXPECT_EQ(s.matched, oracle.matched);
  EXPECT_DOUBLE_EQ(s.precision, 6.0 / 8.0);
  EXPECT_DOUBLE_EQ(s.recall, 6.0 / 7.0);
  EXPECT_LT(s.f1, 1.0);
}

TEST(RoundTrip, WikiIsIgnored) {
  EXPECT_DOUBLE_EQ(roundtrip_score(parse_penman("(c / city :wiki \"Paris\" :quant 2)")).f1, 1.0);
}

}  // namespace
}  // namespace xamr

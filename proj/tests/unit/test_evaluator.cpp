#include <gtest/gtest.h>

#include <sstream>

#include "xamr/data.hpp"
#include "xamr/evaluator.hpp"
#include "xamr/linearize.hpp"

namespace xamr {
namespace {

// One-word sentences mapping to one-concept graphs.
struct WordTask {
  std::vector<ParallelRow> rows;
  Vocabularies vocab;
  std::vector<Example> examples;
  std::vector<EvalItem> items;
};

WordTask word_task(std::size_t n) {
  WordTask t;
  for (std::size_t i = 0; i < n; ++i)
    t.rows.push_back({"xx", "w" + std::to_string(i), "( " + synthetic_concept(i) + " )", i + 1});
  t.vocab = build_vocab(t.rows);
  for (const ParallelRow& r : t.rows) {
    t.examples.push_back(encode_row(r, t.vocab));
    t.items.push_back({r.sentence, t.examples.back(),
                       restore(tokenize_linearized(r.linearized))});
  }
  return t;
}

ModelParams fitted(const WordTask& t, int steps) {
  ModelParams p = init_params({16, 32, t.vocab.source.size(), t.vocab.target.size()}, 1);
  for (int s = 0; s < steps; ++s) {
    const LossAndGradient lg = loss_and_gradient(p, t.examples);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] -= 1.0 * lg.gradient[i];
  }
  return p;
}

TEST(KshotFinetune, ZeroShotsIsIdentity) {
  const WordTask t = word_task(6);
  const ModelParams p = init_params({4, 4, t.vocab.source.size(), t.vocab.target.size()}, 2);
  Rng rng(1);
  EXPECT_EQ(kshot_finetune(p, {}, 0, {}, rng).values, p.values);
  EXPECT_THROW(kshot_finetune(p, t.examples, 7, {}, rng), InsufficientShots);
}

TEST(KshotFinetune, DeterministicAndReducesLoss) {
  const WordTask t = word_task(12);
  const ModelParams p = init_params({8, 8, t.vocab.source.size(), t.vocab.target.size()}, 3);
  Rng a(9), b(9);
  const FinetuneOptions opts{.lr = 0.5, .epochs = 20, .max_batch = 4};
  const ModelParams x = kshot_finetune(p, t.examples, 12, opts, a);
  const ModelParams y = kshot_finetune(p, t.examples, 12, opts, b);
  EXPECT_EQ(x.values, y.values);
  EXPECT_LT(batch_loss(x, t.examples), 0.5 * batch_loss(p, t.examples));
  // The input is not modified.
  EXPECT_EQ(p.values, init_params(p.config, 3).values);
}

TEST(Evaluate, PerfectModelScoresOne) {
  const WordTask t = word_task(10);
  const ModelParams p = fitted(t, 800);
  const EvalReport r = evaluate(p, t.vocab.target, t.items, {.max_len = 8});
  ASSERT_EQ(r.sentences.size(), 10u);
  EXPECT_DOUBLE_EQ(r.smatch.f1, 1.0);
  EXPECT_EQ(r.sentences[3].restored, "(v0 / " + synthetic_concept(3) + ")");
  EXPECT_EQ(r.sentences[3].hypothesis,
            (std::vector<std::string>{"(", synthetic_concept(3), ")"}));
}

TEST(Evaluate, UnrestorableOutputBecomesPlaceholder) {
  const WordTask t = word_task(5);
  ModelParams p = init_params({4, 4, t.vocab.source.size(), t.vocab.target.size()}, 4);
  // Force every decoded token to be "(", which never yields a concept.
  const ParamBlock& bias = p.block("output.bias");
  p.values[bias.offset + t.vocab.target.id("(")] = 100.0;
  const EvalReport r = evaluate(p, t.vocab.target, t.items, {.max_len = 6});
  for (const SentenceRecord& s : r.sentences) {
    EXPECT_TRUE(s.unrestorable);
    EXPECT_EQ(s.restored, "(v0 / amr-empty)");
    EXPECT_EQ(s.hypothesis.size(), 6u);
  }
  // Each pair still matches the TOP triple: 1 of 2 on both sides.
  EXPECT_DOUBLE_EQ(r.smatch.f1, 0.5);
}

TEST(Evaluate, CorpusScoreIsMicroAverageOfRecords) {
  const WordTask t = word_task(40);
  const ModelParams p = fitted(t, 15);
  const EvalReport r = evaluate(p, t.vocab.target, t.items, {.max_len = 8, .restarts = 2});
  long matched = 0, left = 0, right = 0;
  for (const SentenceRecord& s : r.sentences) {
    matched += s.matched;
    left += s.total_left;
    right += s.total_right;
  }
  EXPECT_EQ(matched, r.smatch.matched);
  EXPECT_EQ(left, r.smatch.total_left);
  EXPECT_EQ(right, r.smatch.total_right);
}

TEST(Evaluate, ThreadAndChunkInvariance) {
  const WordTask t = word_task(40);
  const ModelParams p = fitted(t, 15);
  std::ostringstream a, b;
  write_report(a, evaluate(p, t.vocab.target, t.items, {.max_len = 8, .threads = 1}));
  write_report(b, evaluate(p, t.vocab.target, t.items,
                           {.max_len = 8, .threads = 4, .decode_chunk = 7}));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_THROW(evaluate(p, t.vocab.target, {}, {}), std::invalid_argument);
}

EvalReport fake_report(const std::string& model, const std::string& lang, std::size_t k,
                       long matched) {
  EvalReport r;
  r.model = model;
  r.language = lang;
  r.k = k;
  r.lr = 1e-3;
  r.smatch = make_score(matched, 10, 10);
  r.sentences.push_back({"s", {"(", "dog", ")"}, "(v0 / dog)", false, matched, 10, 10, 0.1});
  return r;
}

TEST(Report, RoundTrip) {
  const EvalReport r = fake_report("maml", "ko", 32, 7);
  std::stringstream buf;
  write_report(buf, r);
  const EvalReport back = read_report(buf);
  EXPECT_EQ(back.model, "maml");
  EXPECT_EQ(back.language, "ko");
  EXPECT_EQ(back.k, 32u);
  EXPECT_EQ(back.smatch.matched, 7);
  EXPECT_DOUBLE_EQ(back.smatch.f1, 0.7);
  ASSERT_EQ(back.sentences.size(), 1u);
  EXPECT_EQ(back.sentences[0].hypothesis, r.sentences[0].hypothesis);
  std::stringstream junk("{\"type\": \"sentence\"}\n");
  EXPECT_THROW(read_report(junk), std::invalid_argument);
  std::stringstream none("");
  EXPECT_THROW(read_report(none), std::invalid_argument);
}

TEST(Compare, GridShapeAndDeltas) {
  std::vector<EvalReport> reports;
  long m = 1;
  for (const char* model : {"joint", "maml"})
    for (std::size_t k : {128u, 0u, 32u})
      for (const char* lang : {"l6", "l7"}) reports.push_back(fake_report(model, lang, k, m++));
  const ComparisonTable t = compare_runs(reports);
  EXPECT_EQ(t.languages, (std::vector<std::string>{"l6", "l7"}));
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[0].label, "joint_0-shot");
  EXPECT_EQ(t.rows[2].label, "joint_128-shot");
  EXPECT_EQ(t.rows[3].label, "maml_0-shot");
  // joint k=0 is reports 3,4 -> 0.3, 0.4.
  EXPECT_DOUBLE_EQ(t.rows[0].cells[0], 0.3);
  EXPECT_DOUBLE_EQ(t.rows[0].avg, 0.35);
  ASSERT_EQ(t.deltas.size(), 3u);
  EXPECT_EQ(t.deltas[0].label, "maml-joint_0-shot");
  EXPECT_NEAR(t.deltas[0].avg, 0.6, 1e-12);

  std::ostringstream tsv;
  write_comparison_tsv(tsv, t.rows, t.languages);
  std::istringstream lines(tsv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "model\tl6\tl7\tavg");
  EXPECT_EQ(first, "joint_0-shot\t0.3000\t0.4000\t0.3500");
}

TEST(Compare, RejectsIncompleteOrDuplicateGrid) {
  std::vector<EvalReport> reports = {fake_report("a", "x", 0, 1), fake_report("a", "y", 0, 1),
                                     fake_report("b", "x", 0, 1)};
  EXPECT_THROW(compare_runs(reports), GridMismatch);
  reports.push_back(fake_report("b", "x", 0, 2));
  EXPECT_THROW(compare_runs(reports), GridMismatch);
  EXPECT_THROW(compare_runs({}), GridMismatch);
}

}  // namespace
}  // namespace xamr

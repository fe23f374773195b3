#include <benchmark/benchmark.h>

#include <string>

#include "xamr/linearize.hpp"
#include "xamr/penman.hpp"

namespace {

// Balanced binary tree of `depth` levels with an attribute on every leaf.
std::string tree_text(int depth, int& next) {
  const std::string var = "n" + std::to_string(next++);
  std::string out = "(" + var + " / concept-" + std::to_string(next % 7);
  if (depth == 0) return out + " :quant " + std::to_string(next) + ")";
  out += " :ARG0 " + tree_text(depth - 1, next);
  out += " :ARG1 " + tree_text(depth - 1, next);
  return out + ")";
}

void BM_ParsePenman(benchmark::State& state) {
  int next = 0;
  const std::string text = tree_text(static_cast<int>(state.range(0)), next);
  for (auto _ : state) benchmark::DoNotOptimize(xamr::parse_penman(text));
  state.SetItemsProcessed(state.iterations() * next);
}
BENCHMARK(BM_ParsePenman)->Arg(3)->Arg(6);

void BM_SerializePenman(benchmark::State& state) {
  int next = 0;
  const xamr::AmrGraph g = xamr::parse_penman(tree_text(static_cast<int>(state.range(0)), next));
  for (auto _ : state) benchmark::DoNotOptimize(xamr::serialize_penman(g));
}
BENCHMARK(BM_SerializePenman)->Arg(3)->Arg(6);

void BM_LinearizeRestore(benchmark::State& state) {
  int next = 0;
  const xamr::AmrGraph g = xamr::parse_penman(tree_text(static_cast<int>(state.range(0)), next));
  for (auto _ : state) {
    const auto lin = xamr::preprocess(g);
    benchmark::DoNotOptimize(xamr::restore(lin.tokens));
  }
}
BENCHMARK(BM_LinearizeRestore)->Arg(3)->Arg(6);

}  // namespace
BENCHMARK_MAIN();

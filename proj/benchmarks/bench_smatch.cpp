#include <benchmark/benchmark.h>

#include <string>

#include "xamr/random.hpp"
#include "xamr/smatch.hpp"

namespace {

xamr::AmrGraph random_graph(std::size_t vars, xamr::Rng& rng) {
  static const char* const kConcepts[] = {"dog", "cat", "eat-01", "see-01", "boy", "girl"};
  static const char* const kRoles[] = {":ARG0", ":ARG1", ":mod", ":location"};
  xamr::AmrGraph g;
  for (std::size_t i = 0; i < vars; ++i)
    g.nodes.emplace("x" + std::to_string(i), kConcepts[xamr::uniform_index(rng, 6)]);
  g.root = "x0";
  for (std::size_t i = 1; i < vars; ++i)
    g.edges.push_back({"x" + std::to_string(xamr::uniform_index(rng, i)),
                       kRoles[xamr::uniform_index(rng, 4)], "x" + std::to_string(i)});
  for (std::size_t i = 0; i < vars / 2; ++i)
    g.edges.push_back({"x" + std::to_string(xamr::uniform_index(rng, vars)),
                       kRoles[xamr::uniform_index(rng, 4)],
                       "x" + std::to_string(xamr::uniform_index(rng, vars))});
  return g;
}

void BM_HillClimb(benchmark::State& state) {
  xamr::Rng rng(7);
  const auto vars = static_cast<std::size_t>(state.range(0));
  const xamr::AmrGraph a = random_graph(vars, rng), b = random_graph(vars, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(xamr::compute_smatch(a, b, {.restarts = 8, .seed = 1}));
}
BENCHMARK(BM_HillClimb)->Arg(6)->Arg(20)->Arg(60);

void BM_Exact(benchmark::State& state) {
  xamr::Rng rng(7);
  const auto vars = static_cast<std::size_t>(state.range(0));
  const xamr::AmrGraph a = random_graph(vars, rng), b = random_graph(vars, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xamr::compute_smatch_exact(a, b));
}
BENCHMARK(BM_Exact)->Arg(4)->Arg(6)->Arg(8);

}  // namespace
BENCHMARK_MAIN();

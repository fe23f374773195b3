#include <benchmark/benchmark.h>

#include "xamr/random.hpp"
#include "xamr/seq2seq.hpp"

namespace {

std::vector<xamr::Example> batch_of(std::size_t n, std::size_t vocab, xamr::Rng& rng) {
  std::vector<xamr::Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    xamr::Example ex;
    ex.source = {4};
    ex.target = {xamr::Vocab::kBos};
    for (int t = 0; t < 5; ++t)
      ex.source.push_back(static_cast<int>(4 + xamr::uniform_index(rng, vocab - 4)));
    for (int t = 0; t < 14; ++t)
      ex.target.push_back(static_cast<int>(4 + xamr::uniform_index(rng, vocab - 4)));
    ex.source.push_back(xamr::Vocab::kEos);
    ex.target.push_back(xamr::Vocab::kEos);
    out.push_back(std::move(ex));
  }
  return out;
}

void BM_LossAndGradient(benchmark::State& state) {
  const xamr::ModelConfig config{32, static_cast<std::size_t>(state.range(0)), 200, 40};
  const xamr::ModelParams params = xamr::init_params(config, 1);
  xamr::Rng rng(3);
  const auto batch = batch_of(8, 40, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xamr::loss_and_gradient(params, batch));
}
BENCHMARK(BM_LossAndGradient)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const xamr::ModelConfig config{32, 64, 200, 40};
  const xamr::ModelParams params = xamr::init_params(config, 1);
  xamr::Rng rng(3);
  std::vector<std::vector<int>> sources;
  for (const auto& ex : batch_of(32, 40, rng)) sources.push_back(ex.source);
  for (auto _ : state)
    benchmark::DoNotOptimize(xamr::generate_greedy_batch(params, sources, 20));
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

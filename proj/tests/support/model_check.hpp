// Finite-difference check of the seq2seq loss gradient, block by block.
// Independent of the autodiff grad_check helper: it perturbs the flat
// parameter vector and re-runs the full model.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xamr/random.hpp"
#include "xamr/seq2seq.hpp"

namespace xamr::testing {

// Three examples of different lengths, so padding and masking are exercised.
inline std::vector<Example> random_batch(Rng& rng, const ModelConfig& c, std::size_t n = 3) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.language = "xx";
    ex.source.push_back(static_cast<int>(Vocab::kNumSpecials));
    for (std::size_t k = 0; k < 1 + i; ++k)
      ex.source.push_back(static_cast<int>(Vocab::kNumSpecials +
                                           uniform_index(rng, c.source_vocab - Vocab::kNumSpecials)));
    ex.source.push_back(Vocab::kEos);
    ex.target.push_back(Vocab::kBos);
    for (std::size_t k = 0; k < 3 - i % 2 * 2; ++k)
      ex.target.push_back(static_cast<int>(Vocab::kNumSpecials +
                                           uniform_index(rng, c.target_vocab - Vocab::kNumSpecials)));
    ex.target.push_back(Vocab::kEos);
    out.push_back(std::move(ex));
  }
  return out;
}

struct BlockCheck {
  std::string block;
  double max_relative_error = 0.0;
};

inline std::vector<BlockCheck> check_model_gradients(std::uint64_t seed, double step = 1e-5,
                                                     double floor = 1e-6) {
  const ModelConfig config{3, 4, 9, 8};
  ModelParams params = init_params(config, seed);
  // Non-zero biases so their gradients are exercised away from the origin.
  Rng rng(derive_seed(seed, 99));
  for (double& v : params.values) v += uniform_real(rng, -0.2, 0.2);
  const std::vector<Example> batch = random_batch(rng, config);
  const LossAndGradient analytic = loss_and_gradient(params, batch);

  std::vector<BlockCheck> out;
  for (const ParamBlock& b : params.registry) {
    BlockCheck check{b.name, 0.0};
    for (std::size_t i = b.offset; i < b.offset + b.size(); ++i) {
      const double saved = params.values[i];
      params.values[i] = saved + step;
      const double up = batch_loss(params, batch);
      params.values[i] = saved - step;
      const double down = batch_loss(params, batch);
      params.values[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic.gradient[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      check.max_relative_error = std::max(check.max_relative_error, rel);
    }
    out.push_back(check);
  }
  return out;
}

}  // namespace xamr::testing

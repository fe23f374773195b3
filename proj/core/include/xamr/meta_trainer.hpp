// First-order MAML over per-language episodes, the joint-learning baseline,
// and the warmup/decay learning-rate schedule they share.
//
// The loops are generic over the example type: a task is a function mapping
// (flat parameters, batch) to the batch's mean loss and its gradient. The
// seq2seq model plugs in through seq2seq_objective(); tests use closed-form
// toy objectives.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xamr/autodiff.hpp"
#include "xamr/parallel.hpp"
#include "xamr/random.hpp"
#include "xamr/seq2seq.hpp"

namespace xamr {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  double alpha = 1e-5;  // inner-loop rate
  double beta = 3e-5;   // outer-loop (and joint) peak rate
  std::size_t K = 8;
  std::size_t P = 1;
  std::size_t I = 14;
  std::optional<std::size_t> languages_per_step;
  std::size_t total_steps = 30000;
  std::size_t warmup_steps = 1500;
  std::size_t eval_interval = 500;
  std::size_t patience_steps = 7500;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  std::size_t active_languages() const {
    return languages_per_step ? std::min(*languages_per_step, I) : I;
  }
  // Examples consumed per update: 2 * K * active languages.
  std::size_t batch_size() const { return 2 * K * active_languages(); }
};

// Throws ConfigError describing the first broken constraint.
void validate_config(const TrainConfig& config);

// JSON object with TrainConfig field names; absent fields keep defaults,
// unknown fields are rejected. Throws ConfigError.
TrainConfig parse_train_config(std::string_view json_text);
TrainConfig parse_train_config(std::string_view json_text, TrainConfig defaults);
// Every field, with defaults resolved; languages_per_step is null if unset.
std::string train_config_json(const TrainConfig& config);

// Linear 0 -> peak over [0, warmup], then peak -> 0 over [warmup, total].
double scheduled_rate(std::size_t step, double peak, std::size_t warmup,
                      std::size_t total);

using Params = std::vector<double>;

template <typename Ex>
using Objective =
    std::function<LossAndGradient(const Params&, std::span<const Ex>)>;

template <typename Ex>
struct LanguageDataset {
  std::string language;
  std::vector<Ex> examples;
};

template <typename Ex>
struct Episode {
  std::string language;
  std::vector<Ex> support;
  std::vector<Ex> query;
};

// 2K distinct examples in draw order; the first K form the support set.
template <typename Ex>
Episode<Ex> sample_episode(const LanguageDataset<Ex>& dataset, std::size_t K,
                           Rng& rng) {
  if (K == 0) throw std::invalid_argument("K must be >= 1");
  if (dataset.examples.size() < 2 * K)
    throw InsufficientData("language '" + dataset.language + "' has " +
                           std::to_string(dataset.examples.size()) +
                           " examples, an episode needs " + std::to_string(2 * K));
  const auto picks = sample_without_replacement(dataset.examples.size(), 2 * K, rng);
  Episode<Ex> ep;
  ep.language = dataset.language;
  for (std::size_t i = 0; i < picks.size(); ++i)
    (i < K ? ep.support : ep.query).push_back(dataset.examples[picks[i]]);
  return ep;
}

namespace detail {

inline void check_finite(const Params& p) {
  for (double v : p)
    if (!std::isfinite(v)) throw ad::NonFinite("parameter update produced a non-finite value");
}

// theta -= rate * gradient
inline void sgd_update(Params& theta, const Params& gradient, double rate) {
  if (gradient.size() != theta.size())
    throw std::invalid_argument("gradient length does not match the parameters");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= rate * gradient[i];
  check_finite(theta);
}

inline void add_into(Params& sum, const Params& g) {
  if (sum.empty()) sum.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
}

}  // namespace detail

// P full-support-batch SGD steps from a copy of theta.
template <typename Ex>
Params inner_adapt(const Params& theta, std::span<const Ex> support, double alpha,
                   std::size_t P, const Objective<Ex>& objective) {
  Params phi = theta;
  for (std::size_t p = 0; p < P; ++p)
    detail::sgd_update(phi, objective(phi, support).gradient, alpha);
  return phi;
}

struct StepResult {
  Params theta;
  // Per episode (or per joint micro-batch) loss, in input order.
  std::vector<double> losses;
};

// One first-order MAML update: adapt on each support set, take the
// query-set gradient at the adapted parameters, sum over episodes in input
// order and descend from theta at `rate`.
template <typename Ex>
StepResult outer_step(const Params& theta, std::span<const Episode<Ex>> episodes,
                      double alpha, std::size_t P, double rate,
                      const Objective<Ex>& objective, unsigned threads = 1) {
  if (episodes.empty()) throw std::invalid_argument("outer step without episodes");
  std::vector<LossAndGradient> results(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    const Episode<Ex>& ep = episodes[i];
    const Params phi = inner_adapt<Ex>(theta, ep.support, alpha, P, objective);
    results[i] = objective(phi, ep.query);
  });
  Params total;
  StepResult out;
  for (LossAndGradient& r : results) {
    detail::add_into(total, r.gradient);
    out.losses.push_back(r.loss);
  }
  out.theta = theta;
  detail::sgd_update(out.theta, total, rate);
  return out;
}

// Joint-learning update over one drawn batch. The batch is cut into
// consecutive micro-batches of `micro` examples; their mean-loss gradients
// are summed in order, so a batch holding the query sets of a MAML step
// yields exactly that step's P=0 update.
template <typename Ex>
StepResult joint_step(const Params& theta, std::span<const Ex> batch,
                      std::size_t micro, double rate,
                      const Objective<Ex>& objective, unsigned threads = 1) {
  if (batch.empty()) throw std::invalid_argument("joint step over an empty batch");
  if (micro == 0) throw std::invalid_argument("micro-batch size must be >= 1");
  const std::size_t chunks = (batch.size() + micro - 1) / micro;
  std::vector<LossAndGradient> results(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * micro;
    results[c] = objective(theta, batch.subspan(begin, std::min(micro, batch.size() - begin)));
  });
  Params total;
  StepResult out;
  for (LossAndGradient& r : results) {
    detail::add_into(total, r.gradient);
    out.losses.push_back(r.loss);
  }
  out.theta = theta;
  detail::sgd_update(out.theta, total, rate);
  return out;
}

struct LogRecord {
  std::size_t step = 0;
  double rate = 0.0;
  std::vector<std::pair<std::string, double>> losses;  // label -> loss
  std::optional<double> dev;
};

struct TrainResult {
  Params best;
  std::size_t best_step = 0;
  double best_dev = -std::numeric_limits<double>::infinity();
  std::size_t steps_run = 0;
  bool early_stopped = false;
};

// Scores parameters on the dev set; higher is better.
using DevEval = std::function<double(const Params&)>;
using LogSink = std::function<void(const LogRecord&)>;

namespace detail {

template <typename Ex>
void check_datasets(std::span<const LanguageDataset<Ex>> datasets,
                    const TrainConfig& config) {
  validate_config(config);
  if (datasets.size() != config.I)
    throw ConfigError("config I = " + std::to_string(config.I) + " but " +
                      std::to_string(datasets.size()) + " training languages were given");
}

// Dev evaluation and early stopping. Evaluates every eval_interval steps
// and after the final step; stops once step - best_step > patience.
class Controller {
 public:
  Controller(const TrainConfig& config, const Params& initial, DevEval dev)
      : config_(config), dev_(std::move(dev)) {
    result_.best = initial;
  }

  // Returns true when training must stop after `step`.
  bool after_step(std::size_t step, const Params& theta, LogRecord& record) {
    result_.steps_run = step;
    const bool last = step == config_.total_steps;
    if (dev_ && (step % config_.eval_interval == 0 || last)) {
      const double score = dev_(theta);
      record.dev = score;
      if (score > result_.best_dev) {
        result_.best_dev = score;
        result_.best_step = step;
        result_.best = theta;
      }
      if (step - result_.best_step > config_.patience_steps) {
        result_.early_stopped = true;
        return true;
      }
    }
    return last;
  }

  TrainResult finish(const Params& theta) {
    if (!dev_) {
      result_.best = theta;
      result_.best_step = result_.steps_run;
    }
    return std::move(result_);
  }

 private:
  const TrainConfig& config_;
  DevEval dev_;
  TrainResult result_;
};

// Indices of the languages used at one step, ascending.
inline std::vector<std::size_t> step_languages(const TrainConfig& config, Rng& rng) {
  std::vector<std::size_t> picked;
  if (config.active_languages() < config.I) {
    picked = sample_without_replacement(config.I, config.active_languages(), rng);
    std::sort(picked.begin(), picked.end());
  } else {
    for (std::size_t i = 0; i < config.I; ++i) picked.push_back(i);
  }
  return picked;
}

}  // namespace detail

// Without a dev callback the final parameters are returned as best.
template <typename Ex>
TrainResult maml_train(const Params& initial,
                       std::span<const LanguageDataset<Ex>> datasets,
                       const TrainConfig& config, const Objective<Ex>& objective,
                       DevEval dev = {}, LogSink log = {}) {
  detail::check_datasets(datasets, config);
  for (const auto& d : datasets)
    if (d.examples.size() < 2 * config.K)
      throw InsufficientData("language '" + d.language + "' has fewer than 2K examples");
  Rng rng(config.seed);
  Params theta = initial;
  detail::Controller control(config, initial, std::move(dev));
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    std::vector<Episode<Ex>> episodes;
    for (std::size_t li : detail::step_languages(config, rng))
      episodes.push_back(sample_episode(datasets[li], config.K, rng));
    LogRecord record;
    record.step = step;
    record.rate = scheduled_rate(step, config.beta, config.warmup_steps, config.total_steps);
    StepResult r = outer_step<Ex>(theta, episodes, config.alpha, config.P, record.rate,
                                  objective, config.threads);
    theta = std::move(r.theta);
    for (std::size_t i = 0; i < episodes.size(); ++i)
      record.losses.emplace_back(episodes[i].language, r.losses[i]);
    const bool stop = control.after_step(step, theta, record);
    if (log) log(record);
    if (stop) break;
  }
  return control.finish(theta);
}

// Each step draws batch_size() examples without replacement, uniformly from
// the concatenation of all datasets, and applies joint_step with
// micro-batches of K.
template <typename Ex>
TrainResult joint_train(const Params& initial,
                        std::span<const LanguageDataset<Ex>> datasets,
                        const TrainConfig& config, const Objective<Ex>& objective,
                        DevEval dev = {}, LogSink log = {}) {
  detail::check_datasets(datasets, config);
  std::vector<const Ex*> pool;
  for (const auto& d : datasets)
    for (const Ex& ex : d.examples) pool.push_back(&ex);
  const std::size_t n = config.batch_size();
  if (pool.size() < n)
    throw InsufficientData("joint training needs " + std::to_string(n) +
                           " examples, corpus has " + std::to_string(pool.size()));
  Rng rng(config.seed);
  Params theta = initial;
  detail::Controller control(config, initial, std::move(dev));
  std::vector<Ex> batch;
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    batch.clear();
    for (std::size_t i : sample_without_replacement(pool.size(), n, rng))
      batch.push_back(*pool[i]);
    LogRecord record;
    record.step = step;
    record.rate = scheduled_rate(step, config.beta, config.warmup_steps, config.total_steps);
    StepResult r = joint_step<Ex>(theta, batch, config.K, record.rate, objective,
                                  config.threads);
    theta = std::move(r.theta);
    double mean = 0.0;
    for (double l : r.losses) mean += l;
    record.losses.emplace_back("joint", mean / static_cast<double>(r.losses.size()));
    const bool stop = control.after_step(step, theta, record);
    if (log) log(record);
    if (stop) break;
  }
  return control.finish(theta);
}

// Mean-token cross-entropy of the seq2seq model whose shape matches `like`.
Objective<Example> seq2seq_objective(const ModelParams& like);

// JSON line for one training-log record.
std::string log_record_json(const LogRecord& record);

}  // namespace xamr

#include "xamr/meta_trainer.hpp"

#include <json.hpp>

namespace xamr {

using nlohmann::json;

void validate_config(const TrainConfig& c) {
  if (!(c.alpha > 0.0) || !(c.beta > 0.0)) throw ConfigError("alpha and beta must be > 0");
  if (c.K < 1) throw ConfigError("K must be >= 1");
  if (c.I < 1) throw ConfigError("I must be >= 1");
  if (c.languages_per_step && (*c.languages_per_step < 1 || *c.languages_per_step > c.I))
    throw ConfigError("languages_per_step must lie in [1, I]");
  if (c.total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (c.warmup_steps > c.total_steps) throw ConfigError("warmup_steps exceeds total_steps");
  if (c.eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
}

namespace {

template <typename T>
void read_field(const json& j, const char* name, T& into) {
  auto it = j.find(name);
  if (it == j.end()) return;
  try {
    into = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + name + "' has the wrong type");
  }
}

void read_count(const json& j, const char* name, std::size_t& into) {
  auto it = j.find(name);
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<long long>() < 0)
    throw ConfigError(std::string("config field '") + name +
                      "' must be a non-negative integer");
  into = it->get<std::size_t>();
}

}  // namespace

TrainConfig parse_train_config(std::string_view json_text) {
  return parse_train_config(json_text, TrainConfig{});
}

TrainConfig parse_train_config(std::string_view json_text, TrainConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* const kKnown[] = {
      "alpha", "beta", "K", "P", "I", "languages_per_step", "total_steps",
      "warmup_steps", "eval_interval", "patience_steps", "seed", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw ConfigError("unknown config field '" + key + "'");
  }
  read_field(j, "alpha", c.alpha);
  read_field(j, "beta", c.beta);
  read_count(j, "K", c.K);
  read_count(j, "P", c.P);
  read_count(j, "I", c.I);
  if (auto it = j.find("languages_per_step"); it != j.end()) {
    if (it->is_null()) {
      c.languages_per_step.reset();
    } else {
      std::size_t v = 0;
      read_count(j, "languages_per_step", v);
      c.languages_per_step = v;
    }
  }
  read_count(j, "total_steps", c.total_steps);
  read_count(j, "warmup_steps", c.warmup_steps);
  read_count(j, "eval_interval", c.eval_interval);
  read_count(j, "patience_steps", c.patience_steps);
  read_field(j, "seed", c.seed);
  read_field(j, "threads", c.threads);
  validate_config(c);
  return c;
}

std::string train_config_json(const TrainConfig& c) {
  json j = {{"alpha", c.alpha},
            {"beta", c.beta},
            {"K", c.K},
            {"P", c.P},
            {"I", c.I},
            {"languages_per_step", nullptr},
            {"total_steps", c.total_steps},
            {"warmup_steps", c.warmup_steps},
            {"eval_interval", c.eval_interval},
            {"patience_steps", c.patience_steps},
            {"seed", c.seed},
            {"threads", c.threads}};
  if (c.languages_per_step) j["languages_per_step"] = *c.languages_per_step;
  return j.dump();
}

double scheduled_rate(std::size_t step, double peak, std::size_t warmup,
                      std::size_t total) {
  if (step > total) throw std::invalid_argument("step beyond total_steps");
  if (step <= warmup) {
    return warmup == 0 ? peak
                       : peak * (static_cast<double>(step) / static_cast<double>(warmup));
  }
  return peak * (static_cast<double>(total - step) / static_cast<double>(total - warmup));
}

Objective<Example> seq2seq_objective(const ModelParams& like) {
  return [config = like.config, registry = like.registry](
             const Params& values, std::span<const Example> batch) {
    ModelParams p{config, registry, values};
    return loss_and_gradient(p, batch);
  };
}

std::string log_record_json(const LogRecord& r) {
  json losses = json::object();
  for (const auto& [label, loss] : r.losses) losses[label] = loss;
  json j = {{"step", r.step}, {"rate", r.rate}, {"losses", losses}};
  if (r.dev) j["dev_smatch"] = *r.dev;
  return j.dump();
}

}  // namespace xamr

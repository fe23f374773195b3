// Tiny attention-based encoder-decoder over whitespace tokens: gated
// recurrent (GRU) encoder and decoder with dot-product attention. Sources
// start with a language tag; targets are linearized AMR.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xamr/autodiff.hpp"

namespace xamr {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocab();
  // Token list must start with the four specials in id order.
  static Vocab from_tokens(std::vector<std::string> tokens);

  static std::string language_tag(std::string_view language);

  // Returns the existing id or appends the token.
  int add(const std::string& token);
  // kUnk for unknown tokens.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Example {
  std::string language;
  std::vector<int> source;  // language tag first, EOS last
  std::vector<int> target;  // BOS first, EOS last
};

Example make_example(const std::string& language,
                     std::span<const std::string> source_tokens,
                     std::span<const std::string> target_tokens,
                     const Vocab& source_vocab, const Vocab& target_vocab);

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
};

struct ParamBlock {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;

  std::size_t size() const { return rows * cols; }
};

// Flat parameter vector plus the registry naming each block. Values are
// plain data: copying a ModelParams is a deep copy.
struct ModelParams {
  ModelConfig config;
  std::vector<ParamBlock> registry;
  std::vector<double> values;

  const ParamBlock& block(std::string_view name) const;
  std::span<const double> view(const ParamBlock& b) const {
    return std::span<const double>(values).subspan(b.offset, b.size());
  }
};

// Block layout for a config; offsets are contiguous in registry order.
std::vector<ParamBlock> parameter_registry(const ModelConfig& config);

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], embeddings uniform
// in [-1, 1], biases zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Teacher-forced token cross-entropy, averaged over every non-PAD target
// position of the batch. `blocks` are the tape leaves in registry order.
struct LossTape {
  ad::Tape tape;
  ad::Var loss;
  std::vector<ad::Var> blocks;
};

LossTape build_loss(const ModelParams& params, std::span<const Example> batch);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // aligned with ModelParams::values
};

LossAndGradient loss_and_gradient(const ModelParams& params,
                                  std::span<const Example> batch);

double batch_loss(const ModelParams& params, std::span<const Example> batch);

// Greedy argmax decoding from BOS until EOS or max_len tokens; the result
// excludes BOS and EOS. Ties go to the lowest token id.
std::vector<int> generate_greedy(const ModelParams& params,
                                 std::span<const int> source,
                                 std::size_t max_len);

// Batched form; the result is independent of how callers group sources only
// up to floating-point summation order, so fixed chunking keeps it
// reproducible.
std::vector<std::vector<int>> generate_greedy_batch(
    const ModelParams& params, std::span<const std::vector<int>> sources,
    std::size_t max_len);

// ---- checkpoints ----

struct Model {
  Vocab source;
  Vocab target;
  ModelParams params;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary little-endian: "MAMR", u32 version, u32 embed/hidden dims, both
// vocabularies (u32 count, then u32 length + UTF-8 bytes per token), the
// block registry (u32 count, then name, u32 rows, u32 cols), u64 value
// count and the values as 32-bit floats.
void save_checkpoint(const Model& model, std::ostream& out);
Model load_checkpoint(std::istream& in);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// Values rounded through 32-bit floats, i.e. what a checkpoint stores.
ModelParams quantized(const ModelParams& params);

}  // namespace xamr

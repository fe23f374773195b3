#include "xamr/seq2seq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "xamr/random.hpp"

namespace xamr {

// ---- Vocab ----

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  if (tokens.size() < kNumSpecials ||
      !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin()))
    throw std::invalid_argument("vocabulary must start with the special tokens");
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
    if (v.contains(tokens[i]))
      throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

std::string Vocab::language_tag(std::string_view language) {
  return "<" + std::string(language) + ">";
}

int Vocab::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(int id) const { return tokens_.at(id); }

Example make_example(const std::string& language,
                     std::span<const std::string> source_tokens,
                     std::span<const std::string> target_tokens,
                     const Vocab& source_vocab, const Vocab& target_vocab) {
  Example ex;
  ex.language = language;
  ex.source.push_back(source_vocab.id(Vocab::language_tag(language)));
  for (const std::string& t : source_tokens) ex.source.push_back(source_vocab.id(t));
  ex.source.push_back(Vocab::kEos);
  ex.target.push_back(Vocab::kBos);
  for (const std::string& t : target_tokens) ex.target.push_back(target_vocab.id(t));
  ex.target.push_back(Vocab::kEos);
  return ex;
}

// ---- parameters ----

const ParamBlock& ModelParams::block(std::string_view name) const {
  for (const ParamBlock& b : registry)
    if (b.name == name) return b;
  throw std::out_of_range("no parameter block named '" + std::string(name) + "'");
}

namespace {

enum BlockIndex : std::size_t {
  kSourceEmbed,
  kTargetEmbed,
  kEncoderInput,
  kEncoderHidden,
  kEncoderInputBias,
  kEncoderHiddenBias,
  kDecoderInput,
  kDecoderHidden,
  kDecoderInputBias,
  kDecoderHiddenBias,
  kAttention,
  kCombine,
  kCombineBias,
  kOutput,
  kOutputBias,
  kNumBlocks,
};

enum class InitKind { kEmbedding, kWeight, kBias };

// At 0.1 the source signal is too weak for plain SGD: the decoder settles on
// per-position concept frequencies before attention learns to read words.
constexpr double kEmbeddingBound = 1.0;

struct BlockSpec {
  const char* name;
  std::size_t rows, cols;
  InitKind init;
};

std::vector<BlockSpec> block_specs(const ModelConfig& c) {
  const std::size_t e = c.embed_dim, h = c.hidden_dim;
  return {
      {"source_embedding", c.source_vocab, e, InitKind::kEmbedding},
      {"target_embedding", c.target_vocab, e, InitKind::kEmbedding},
      {"encoder.input_weight", e, 3 * h, InitKind::kWeight},
      {"encoder.hidden_weight", h, 3 * h, InitKind::kWeight},
      {"encoder.input_bias", 1, 3 * h, InitKind::kBias},
      {"encoder.hidden_bias", 1, 3 * h, InitKind::kBias},
      {"decoder.input_weight", e, 3 * h, InitKind::kWeight},
      {"decoder.hidden_weight", h, 3 * h, InitKind::kWeight},
      {"decoder.input_bias", 1, 3 * h, InitKind::kBias},
      {"decoder.hidden_bias", 1, 3 * h, InitKind::kBias},
      {"attention.query_weight", h, h, InitKind::kWeight},
      {"combine.weight", 2 * h, h, InitKind::kWeight},
      {"combine.bias", 1, h, InitKind::kBias},
      {"output.weight", h, c.target_vocab, InitKind::kWeight},
      {"output.bias", 1, c.target_vocab, InitKind::kBias},
  };
}

}  // namespace

std::vector<ParamBlock> parameter_registry(const ModelConfig& config) {
  if (config.embed_dim < 1 || config.hidden_dim < 1 || config.source_vocab < 1 ||
      config.target_vocab < 1)
    throw std::invalid_argument("model dimensions must be >= 1");
  std::vector<ParamBlock> out;
  std::size_t offset = 0;
  for (const BlockSpec& s : block_specs(config)) {
    out.push_back({s.name, s.rows, s.cols, offset});
    offset += s.rows * s.cols;
  }
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p;
  p.config = config;
  p.registry = parameter_registry(config);
  p.values.reserve(p.registry.back().offset + p.registry.back().size());
  Rng rng(seed);
  const auto specs = block_specs(config);
  for (const BlockSpec& s : specs) {
    const double bound = s.init == InitKind::kEmbedding
                             ? kEmbeddingBound
                             : 1.0 / std::sqrt(static_cast<double>(s.rows));
    for (std::size_t i = 0; i < s.rows * s.cols; ++i)
      p.values.push_back(s.init == InitKind::kBias
                             ? 0.0
                             : uniform_real(rng, -bound, bound));
  }
  return p;
}

// ---- network ----

namespace {

constexpr double kMaskedScore = -1e9;

class Network {
 public:
  Network(const ModelParams& params, bool trainable) : params_(params) {
    if (params.registry.size() != kNumBlocks)
      throw std::invalid_argument("parameter registry does not match the model");
    for (const ParamBlock& b : params.registry) {
      auto v = params.view(b);
      ad::Tensor t({b.rows, b.cols}, std::vector<double>(v.begin(), v.end()));
      blocks_.push_back(trainable ? tape_.parameter(std::move(t))
                                  : tape_.constant(std::move(t)));
    }
  }

  ad::Tape& tape() { return tape_; }
  const std::vector<ad::Var>& blocks() const { return blocks_; }

  // Encodes padded sources; fills memory_, attention_mask_ and returns the
  // final hidden state of every row.
  ad::Var encode(std::span<const std::vector<int>> sources) {
    const std::size_t batch = sources.size(), hidden = params_.config.hidden_dim;
    std::size_t len = 0;
    for (const auto& s : sources) len = std::max(len, s.size());
    if (len == 0) throw std::invalid_argument("empty source sequence");

    ad::Var h = tape_.constant(ad::Tensor({batch, hidden}));
    std::vector<ad::Var> states;
    states.reserve(len);
    ad::Tensor mask_scores({batch, len});
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<int> ids(batch, Vocab::kPad);
      ad::Tensor keep({batch, hidden});
      bool any_padding = false;
      for (std::size_t b = 0; b < batch; ++b) {
        if (t < sources[b].size()) {
          ids[b] = sources[b][t];
          for (std::size_t k = 0; k < hidden; ++k) keep.at(b, k) = 1.0;
        } else {
          any_padding = true;
          mask_scores.at(b, t) = kMaskedScore;
        }
      }
      ad::Var x = tape_.embedding_lookup(blocks_[kSourceEmbed], std::move(ids));
      ad::Var next = gru(x, h, kEncoderInput);
      if (any_padding) {
        // h += keep * (next - h): padded rows carry their last state.
        ad::Var delta = tape_.mul(tape_.constant(std::move(keep)), tape_.sub(next, h));
        h = tape_.add(h, delta);
      } else {
        h = next;
      }
      states.push_back(h);
    }
    memory_ = tape_.stack_steps(states);
    attention_mask_ = tape_.constant(std::move(mask_scores));
    return h;
  }

  // One decoder step: consumes the previous target ids, returns logits.
  ad::Var decode_step(ad::Var& state, std::vector<int> previous) {
    ad::Var y = tape_.embedding_lookup(blocks_[kTargetEmbed], std::move(previous));
    state = gru(y, state, kDecoderInput);
    ad::Var query = tape_.matmul(state, blocks_[kAttention]);
    ad::Var scores = tape_.add(tape_.attention_scores(memory_, query), attention_mask_);
    ad::Var weights = tape_.softmax_rows(scores);
    ad::Var context = tape_.attention_context(weights, memory_);
    const ad::Var both[] = {state, context};
    ad::Var combined = tape_.tanh(tape_.add(
        tape_.matmul(tape_.concat_cols(both), blocks_[kCombine]), blocks_[kCombineBias]));
    return tape_.add(tape_.matmul(combined, blocks_[kOutput]), blocks_[kOutputBias]);
  }

 private:
  // GRU cell; `first` indexes the input weight of a 4-block group
  // (input weight, hidden weight, input bias, hidden bias).
  ad::Var gru(ad::Var x, ad::Var h, std::size_t first) {
    const std::size_t n = params_.config.hidden_dim;
    ad::Var gx = tape_.add(tape_.matmul(x, blocks_[first]), blocks_[first + 2]);
    ad::Var gh = tape_.add(tape_.matmul(h, blocks_[first + 1]), blocks_[first + 3]);
    ad::Var reset = tape_.sigmoid(
        tape_.add(tape_.slice_cols(gx, 0, n), tape_.slice_cols(gh, 0, n)));
    ad::Var update = tape_.sigmoid(
        tape_.add(tape_.slice_cols(gx, n, n), tape_.slice_cols(gh, n, n)));
    ad::Var candidate = tape_.tanh(tape_.add(
        tape_.slice_cols(gx, 2 * n, n), tape_.mul(reset, tape_.slice_cols(gh, 2 * n, n))));
    return tape_.add(candidate, tape_.mul(update, tape_.sub(h, candidate)));
  }

  const ModelParams& params_;
  ad::Tape tape_;
  std::vector<ad::Var> blocks_;
  ad::Var memory_;
  ad::Var attention_mask_;
};

}  // namespace

LossTape build_loss(const ModelParams& params, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("loss over an empty batch");
  Network net(params, true);
  std::vector<std::vector<int>> sources;
  std::size_t steps = 0;
  for (const Example& ex : batch) {
    if (ex.source.empty() || ex.target.size() < 2)
      throw std::invalid_argument("example sequences are too short");
    sources.push_back(ex.source);
    steps = std::max(steps, ex.target.size() - 1);
  }
  ad::Var state = net.encode(sources);
  std::vector<ad::Var> logits;
  std::vector<int> targets;
  logits.reserve(steps);
  targets.reserve(steps * batch.size());
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> previous(batch.size(), Vocab::kPad);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& tgt = batch[b].target;
      if (t + 1 < tgt.size()) {
        previous[b] = tgt[t];
        targets.push_back(tgt[t + 1]);
      } else {
        targets.push_back(Vocab::kPad);
      }
    }
    logits.push_back(net.decode_step(state, std::move(previous)));
  }
  ad::Tape& tape = net.tape();
  ad::Var all = tape.concat_rows(logits);
  ad::Var loss = tape.cross_entropy(all, std::move(targets), Vocab::kPad);
  return {std::move(tape), loss, net.blocks()};
}

LossAndGradient loss_and_gradient(const ModelParams& params,
                                  std::span<const Example> batch) {
  LossTape lt = build_loss(params, batch);
  const ad::Gradients grads = lt.tape.backward(lt.loss);
  LossAndGradient out;
  out.loss = lt.tape.value(lt.loss)[0];
  out.gradient.resize(params.values.size());
  for (std::size_t k = 0; k < params.registry.size(); ++k) {
    auto g = grads.of(lt.blocks[k]).data();
    std::copy(g.begin(), g.end(), out.gradient.begin() + params.registry[k].offset);
  }
  return out;
}

double batch_loss(const ModelParams& params, std::span<const Example> batch) {
  LossTape lt = build_loss(params, batch);
  return lt.tape.value(lt.loss)[0];
}

std::vector<std::vector<int>> generate_greedy_batch(
    const ModelParams& params, std::span<const std::vector<int>> sources,
    std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<std::vector<int>> out(sources.size());
  if (sources.empty()) return out;
  Network net(params, false);
  ad::Var state = net.encode(sources);
  std::vector<int> previous(sources.size(), Vocab::kBos);
  std::vector<bool> done(sources.size(), false);
  for (std::size_t t = 0; t < max_len; ++t) {
    ad::Var logits = net.decode_step(state, previous);
    const ad::Tensor& v = net.tape().value(logits);
    bool all_done = true;
    for (std::size_t b = 0; b < sources.size(); ++b) {
      const double* row = v.data().data() + b * v.cols();
      const int best = static_cast<int>(std::max_element(row, row + v.cols()) - row);
      previous[b] = best;
      if (done[b]) continue;
      if (best == Vocab::kEos)
        done[b] = true;
      else
        out[b].push_back(best);
      all_done = all_done && done[b];
    }
    if (all_done) break;
  }
  return out;
}

std::vector<int> generate_greedy(const ModelParams& params,
                                 std::span<const int> source,
                                 std::size_t max_len) {
  const std::vector<std::vector<int>> one{
      std::vector<int>(source.begin(), source.end())};
  return generate_greedy_batch(params, one, max_len).front();
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[4] = {'M', 'A', 'M', 'R'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_vocab(std::ostream& out, const Vocab& v) {
  put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (const std::string& t : v.tokens()) put_string(out, t);
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  if (!in.read(dst, static_cast<std::streamsize>(n)))
    throw CheckpointError("truncated checkpoint");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  return lo | static_cast<std::uint64_t>(get_u32(in)) << 32;
}

std::string get_string(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > (1u << 20)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

Vocab get_vocab(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > (1u << 24)) throw CheckpointError("implausible vocabulary size in checkpoint");
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(get_string(in));
  try {
    return Vocab::from_tokens(std::move(tokens));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("bad vocabulary in checkpoint: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  const ModelParams& p = model.params;
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(p.config.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(p.config.hidden_dim));
  put_vocab(out, model.source);
  put_vocab(out, model.target);
  put_u32(out, static_cast<std::uint32_t>(p.registry.size()));
  for (const ParamBlock& b : p.registry) {
    put_string(out, b.name);
    put_u32(out, static_cast<std::uint32_t>(b.rows));
    put_u32(out, static_cast<std::uint32_t>(b.cols));
  }
  put_u64(out, p.values.size());
  for (double v : p.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw CheckpointError("failed writing checkpoint");
}

Model load_checkpoint(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Model m;
  m.params.config.embed_dim = get_u32(in);
  m.params.config.hidden_dim = get_u32(in);
  m.source = get_vocab(in);
  m.target = get_vocab(in);
  m.params.config.source_vocab = m.source.size();
  m.params.config.target_vocab = m.target.size();
  try {
    m.params.registry = parameter_registry(m.params.config);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }
  const std::uint32_t blocks = get_u32(in);
  if (blocks != m.params.registry.size())
    throw CheckpointError("checkpoint block count does not match the model");
  for (const ParamBlock& expected : m.params.registry) {
    const std::string name = get_string(in);
    const std::uint32_t rows = get_u32(in), cols = get_u32(in);
    if (name != expected.name || rows != expected.rows || cols != expected.cols)
      throw CheckpointError("checkpoint block '" + name + "' does not match the model");
  }
  const std::uint64_t count = get_u64(in);
  const ParamBlock& last = m.params.registry.back();
  if (count != last.offset + last.size())
    throw CheckpointError("checkpoint parameter count does not match the registry");
  m.params.values.resize(count);
  for (double& v : m.params.values) v = std::bit_cast<float>(get_u32(in));
  return m;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  save_checkpoint(model, out);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

ModelParams quantized(const ModelParams& params) {
  ModelParams out = params;
  for (double& v : out.values) v = static_cast<float>(v);
  return out;
}

}  // namespace xamr

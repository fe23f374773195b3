// Reverse-mode automatic differentiation over dense row-major tensors of
// doubles. A Tape records primitives in execution order; backward() walks it
// once in reverse.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xamr::ad {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a forward value is NaN or infinite.
class NonFinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotScalarLoss : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape);  // zeros

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  // Matrix view: rank-2 tensors only.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Shape& shape);

struct Var {
  int id = -1;
};

class Gradients {
 public:
  // Zero tensor of the right shape for nodes the loss does not reach.
  const Tensor& of(Var v) const { return grads_.at(v.id); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaf whose gradient is reported by backward().
  Var parameter(Tensor value);
  // Leaf excluded from differentiation.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const { return nodes_.size(); }

  // Elementwise over equal shapes; add/sub also accept a 1 x cols right
  // operand broadcast over the rows of a matrix.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var matmul(Var a, Var b);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  // Rows of `table` selected by ids.
  Var embedding_lookup(Var table, std::vector<int> ids);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var sum(Var a);
  // T matrices of shape {B, H} -> tensor {B, T, H}.
  Var stack_steps(std::span<const Var> steps);
  // memory {B, T, H}, query {B, H} -> {B, T} dot products.
  Var attention_scores(Var memory, Var query);
  // weights {B, T}, memory {B, T, H} -> {B, H} weighted sums.
  Var attention_context(Var weights, Var memory);
  // Mean over rows whose target differs from `ignore_id` of the negative
  // log-softmax probability of the target column.
  Var cross_entropy(Var logits, std::vector<int> targets, int ignore_id = -1);

  Gradients backward(Var loss) const;

 private:
  enum class Op {
    kLeaf,
    kAdd,
    kAddRow,
    kSub,
    kSubRow,
    kMul,
    kScale,
    kMatmul,
    kTanh,
    kSigmoid,
    kSoftmaxRows,
    kEmbedding,
    kConcatRows,
    kConcatCols,
    kSliceCols,
    kSum,
    kStackSteps,
    kAttentionScores,
    kAttentionContext,
    kCrossEntropy,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::vector<int> inputs;
    std::vector<int> ids;  // embedding ids / cross-entropy targets
    double factor = 0.0;   // scale factor / cross-entropy row count
    std::size_t offset = 0;
    int ignore_id = -1;
    Tensor value;
    Tensor aux;  // cached softmax probabilities
    bool requires_grad = false;
  };

  Var push(Node node, const char* op_name);
  const Node& node(Var v) const;
  void backward_node(const Node& n, const Tensor& g,
                     std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
};

using ScalarFunction =
    std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

// Compares backward() against central finite differences for every
// component of every input. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const ScalarFunction& f,
                           const std::vector<Tensor>& point, double step = 1e-5,
                           double floor = 1e-6);

}  // namespace xamr::ad

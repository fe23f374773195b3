#include "xamr/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace xamr::ad {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

MatrixMap as_matrix(Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeMismatch(std::string(op) + ": expected a matrix, got " +
                        shape_string(t.shape()));
}

void accumulate(Tensor& into, const Tensor& delta) {
  auto dst = into.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() ||
      std::any_of(shape_.begin(), shape_.end(),
                  [](std::size_t d) { return d == 0; }))
    throw ShapeMismatch("tensor dimensions must be positive: " +
                        shape_string(shape_));
  if (data_.size() != product(shape_))
    throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
}

Tensor::Tensor(Shape shape) : Tensor(shape, std::vector<double>(product(shape))) {}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::out_of_range("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Node n, const char* op_name) {
  if (!n.value.all_finite())
    throw NonFinite(std::string("non-finite value produced by ") + op_name +
                    " (node " + std::to_string(nodes_.size()) + ", shape " +
                    shape_string(n.value.shape()) + ")");
  for (int in : n.inputs) n.requires_grad |= nodes_[in].requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n), "parameter");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  Node n;
  n.inputs = {a.id, b.id};
  n.value = x;
  auto out = n.value.data();
  auto yd = y.data();
  if (x.shape() == y.shape()) {
    n.op = Op::kAdd;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += yd[i];
  } else if (x.rank() == 2 && y.rank() == 2 && y.rows() == 1 &&
             y.cols() == x.cols()) {
    n.op = Op::kAddRow;
    const std::size_t c = x.cols();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += yd[i % c];
  } else {
    throw ShapeMismatch("add: " + shape_string(x.shape()) + " vs " +
                        shape_string(y.shape()));
  }
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  Node n;
  n.inputs = {a.id, b.id};
  n.value = x;
  auto out = n.value.data();
  auto yd = y.data();
  if (x.shape() == y.shape()) {
    n.op = Op::kSub;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= yd[i];
  } else if (x.rank() == 2 && y.rank() == 2 && y.rows() == 1 &&
             y.cols() == x.cols()) {
    n.op = Op::kSubRow;
    const std::size_t c = x.cols();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= yd[i % c];
  } else {
    throw ShapeMismatch("sub: " + shape_string(x.shape()) + " vs " +
                        shape_string(y.shape()));
  }
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  if (x.shape() != y.shape())
    throw ShapeMismatch("mul: " + shape_string(x.shape()) + " vs " +
                        shape_string(y.shape()));
  Node n;
  n.op = Op::kMul;
  n.inputs = {a.id, b.id};
  n.value = x;
  auto out = n.value.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= yd[i];
  return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {a.id};
  n.factor = factor;
  n.value = node(a).value;
  for (double& v : n.value.data()) v *= factor;
  return push(std::move(n), "scale");
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  if (x.cols() != y.rows())
    throw ShapeMismatch("matmul: " + shape_string(x.shape()) + " x " +
                        shape_string(y.shape()));
  Node n;
  n.op = Op::kMatmul;
  n.inputs = {a.id, b.id};
  n.value = Tensor({x.rows(), y.cols()});
  as_matrix(n.value).noalias() = as_matrix(x) * as_matrix(y);
  return push(std::move(n), "matmul");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.inputs = {a.id};
  n.value = node(a).value;
  for (double& v : n.value.data()) v = std::tanh(v);
  return push(std::move(n), "tanh");
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {a.id};
  n.value = node(a).value;
  for (double& v : n.value.data()) v = stable_sigmoid(v);
  return push(std::move(n), "sigmoid");
}

Var Tape::softmax_rows(Var a) {
  const Tensor& x = node(a).value;
  require_matrix(x, "softmax_rows");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.inputs = {a.id};
  n.value = x;
  const std::size_t cols = x.cols();
  auto out = n.value.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = out.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += row[c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  return push(std::move(n), "softmax_rows");
}

Var Tape::embedding_lookup(Var table, std::vector<int> ids) {
  const Tensor& t = node(table).value;
  require_matrix(t, "embedding_lookup");
  if (ids.empty()) throw ShapeMismatch("embedding_lookup: no ids");
  const std::size_t dim = t.cols();
  Node n;
  n.op = Op::kEmbedding;
  n.inputs = {table.id};
  n.value = Tensor({ids.size(), dim});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= t.rows())
      throw ShapeMismatch("embedding_lookup: id " + std::to_string(ids[r]) +
                          " outside table of " + std::to_string(t.rows()) +
                          " rows");
    std::copy_n(t.data().data() + ids[r] * dim, dim,
                n.value.data().data() + r * dim);
  }
  n.ids = std::move(ids);
  return push(std::move(n), "embedding_lookup");
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const std::size_t cols = node(parts[0]).value.cols();
  std::size_t rows = 0;
  Node n;
  n.op = Op::kConcatRows;
  for (Var p : parts) {
    const Tensor& t = node(p).value;
    require_matrix(t, "concat_rows");
    if (t.cols() != cols)
      throw ShapeMismatch("concat_rows: column mismatch " +
                          shape_string(t.shape()));
    rows += t.rows();
    n.inputs.push_back(p.id);
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (Var p : parts) {
    auto d = node(p).value.data();
    data.insert(data.end(), d.begin(), d.end());
  }
  n.value = Tensor({rows, cols}, std::move(data));
  return push(std::move(n), "concat_rows");
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const std::size_t rows = node(parts[0]).value.rows();
  std::size_t cols = 0;
  Node n;
  n.op = Op::kConcatCols;
  for (Var p : parts) {
    const Tensor& t = node(p).value;
    require_matrix(t, "concat_cols");
    if (t.rows() != rows)
      throw ShapeMismatch("concat_cols: row mismatch " +
                          shape_string(t.shape()));
    cols += t.cols();
    n.inputs.push_back(p.id);
  }
  n.value = Tensor({rows, cols});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& t = node(p).value;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(t.data().data() + r * t.cols(), t.cols(),
                  n.value.data().data() + r * cols + offset);
    offset += t.cols();
  }
  return push(std::move(n), "concat_cols");
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = node(a).value;
  require_matrix(x, "slice_cols");
  if (count == 0 || begin + count > x.cols())
    throw ShapeMismatch("slice_cols: [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) + ") outside " +
                        shape_string(x.shape()));
  Node n;
  n.op = Op::kSliceCols;
  n.inputs = {a.id};
  n.offset = begin;
  n.value = Tensor({x.rows(), count});
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::copy_n(x.data().data() + r * x.cols() + begin, count,
                n.value.data().data() + r * count);
  return push(std::move(n), "slice_cols");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.inputs = {a.id};
  auto d = node(a).value.data();
  n.value = Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0));
  return push(std::move(n), "sum");
}

Var Tape::stack_steps(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeMismatch("stack_steps: no inputs");
  const Tensor& first = node(steps[0]).value;
  require_matrix(first, "stack_steps");
  const std::size_t batch = first.rows(), width = first.cols(),
                    time = steps.size();
  Node n;
  n.op = Op::kStackSteps;
  n.value = Tensor({batch, time, width});
  for (std::size_t t = 0; t < time; ++t) {
    const Tensor& s = node(steps[t]).value;
    if (s.shape() != first.shape())
      throw ShapeMismatch("stack_steps: step shape " + shape_string(s.shape()));
    n.inputs.push_back(steps[t].id);
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(s.data().data() + b * width, width,
                  n.value.data().data() + (b * time + t) * width);
  }
  return push(std::move(n), "stack_steps");
}

Var Tape::attention_scores(Var memory, Var query) {
  const Tensor& m = node(memory).value;
  const Tensor& q = node(query).value;
  if (m.rank() != 3 || q.rank() != 2 || m.dim(0) != q.rows() ||
      m.dim(2) != q.cols())
    throw ShapeMismatch("attention_scores: memory " + shape_string(m.shape()) +
                        " query " + shape_string(q.shape()));
  const std::size_t batch = m.dim(0), time = m.dim(1), width = m.dim(2);
  Node n;
  n.op = Op::kAttentionScores;
  n.inputs = {memory.id, query.id};
  n.value = Tensor({batch, time});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* qb = q.data().data() + b * width;
    for (std::size_t t = 0; t < time; ++t) {
      const double* mt = m.data().data() + (b * time + t) * width;
      double s = 0.0;
      for (std::size_t h = 0; h < width; ++h) s += mt[h] * qb[h];
      n.value.at(b, t) = s;
    }
  }
  return push(std::move(n), "attention_scores");
}

Var Tape::attention_context(Var weights, Var memory) {
  const Tensor& w = node(weights).value;
  const Tensor& m = node(memory).value;
  if (m.rank() != 3 || w.rank() != 2 || m.dim(0) != w.rows() ||
      m.dim(1) != w.cols())
    throw ShapeMismatch("attention_context: weights " +
                        shape_string(w.shape()) + " memory " +
                        shape_string(m.shape()));
  const std::size_t batch = m.dim(0), time = m.dim(1), width = m.dim(2);
  Node n;
  n.op = Op::kAttentionContext;
  n.inputs = {weights.id, memory.id};
  n.value = Tensor({batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    double* out = n.value.data().data() + b * width;
    for (std::size_t t = 0; t < time; ++t) {
      const double wt = w.at(b, t);
      const double* mt = m.data().data() + (b * time + t) * width;
      for (std::size_t h = 0; h < width; ++h) out[h] += wt * mt[h];
    }
  }
  return push(std::move(n), "attention_context");
}

Var Tape::cross_entropy(Var logits, std::vector<int> targets, int ignore_id) {
  const Tensor& x = node(logits).value;
  require_matrix(x, "cross_entropy");
  if (targets.size() != x.rows())
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) +
                        " targets for " + shape_string(x.shape()));
  const std::size_t cols = x.cols();
  Node n;
  n.op = Op::kCrossEntropy;
  n.inputs = {logits.id};
  n.aux = Tensor(x.shape());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] == ignore_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols)
      throw ShapeMismatch("cross_entropy: target " +
                          std::to_string(targets[r]) + " outside " +
                          std::to_string(cols) + " classes");
    const double* row = x.data().data() + r * cols;
    double* prob = n.aux.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += prob[c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < cols; ++c) prob[c] /= z;
    total += std::log(z) + mx - row[targets[r]];
    ++counted;
  }
  if (counted == 0)
    throw ShapeMismatch("cross_entropy: every target is ignored");
  n.factor = static_cast<double>(counted);
  n.value = Tensor::scalar(total / n.factor);
  n.ids = std::move(targets);
  n.ignore_id = ignore_id;
  return push(std::move(n), "cross_entropy");
}

Gradients Tape::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1)
    throw NotScalarLoss("backward: loss has shape " +
                        shape_string(root.value.shape()));
  Gradients out;
  out.grads_.resize(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  out.grads_[loss.id] = Tensor(root.value.shape(), {1.0});
  live[loss.id] = true;
  for (int i = loss.id; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!live[i] || !n.requires_grad || n.op == Op::kLeaf) continue;
    for (int in : n.inputs) {
      if (!live[in]) {
        out.grads_[in] = Tensor(nodes_[in].value.shape());
        live[in] = true;
      }
    }
    backward_node(n, out.grads_[i], out.grads_);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!live[i]) out.grads_[i] = Tensor(nodes_[i].value.shape());
  return out;
}

void Tape::backward_node(const Node& n, const Tensor& g,
                         std::vector<Tensor>& grads) const {
  auto gd = g.data();
  auto input = [&](std::size_t k) -> const Tensor& {
    return nodes_[n.inputs[k]].value;
  };
  auto grad = [&](std::size_t k) -> Tensor& { return grads[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      if (wants(0)) accumulate(grad(0), g);
      if (wants(1)) {
        auto d = grad(1).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * gd[i];
      }
      break;
    }
    case Op::kAddRow:
    case Op::kSubRow: {
      const double sign = n.op == Op::kAddRow ? 1.0 : -1.0;
      if (wants(0)) accumulate(grad(0), g);
      if (wants(1)) {
        auto d = grad(1).data();
        const std::size_t c = d.size();
        for (std::size_t i = 0; i < gd.size(); ++i) d[i % c] += sign * gd[i];
      }
      break;
    }
    case Op::kMul:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        auto other = input(1 - k).data();
        auto d = grad(k).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * other[i];
      }
      break;
    case Op::kScale:
      if (wants(0)) {
        auto d = grad(0).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += n.factor * gd[i];
      }
      break;
    case Op::kMatmul:
      if (wants(0)) as_matrix(grad(0)).noalias() += as_matrix(g) * as_matrix(input(1)).transpose();
      if (wants(1)) as_matrix(grad(1)).noalias() += as_matrix(input(0)).transpose() * as_matrix(g);
      break;
    case Op::kTanh:
      if (wants(0)) {
        auto y = n.value.data();
        auto d = grad(0).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * (1.0 - y[i] * y[i]);
      }
      break;
    case Op::kSigmoid:
      if (wants(0)) {
        auto y = n.value.data();
        auto d = grad(0).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * y[i] * (1.0 - y[i]);
      }
      break;
    case Op::kSoftmaxRows:
      if (wants(0)) {
        const std::size_t cols = n.value.cols();
        auto y = n.value.data();
        auto d = grad(0).data();
        for (std::size_t r = 0; r < n.value.rows(); ++r) {
          const std::size_t base = r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gd[base + c] * y[base + c];
          for (std::size_t c = 0; c < cols; ++c)
            d[base + c] += y[base + c] * (gd[base + c] - dot);
        }
      }
      break;
    case Op::kEmbedding:
      if (wants(0)) {
        const std::size_t dim = n.value.cols();
        auto d = grad(0).data();
        for (std::size_t r = 0; r < n.ids.size(); ++r)
          for (std::size_t c = 0; c < dim; ++c)
            d[n.ids[r] * dim + c] += gd[r * dim + c];
      }
      break;
    case Op::kConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t len = input(k).size();
        if (wants(k)) {
          auto d = grad(k).data();
          for (std::size_t i = 0; i < len; ++i) d[i] += gd[offset + i];
        }
        offset += len;
      }
      break;
    }
    case Op::kConcatCols: {
      const std::size_t rows = n.value.rows(), cols = n.value.cols();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t width = input(k).cols();
        if (wants(k)) {
          auto d = grad(k).data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < width; ++c)
              d[r * width + c] += gd[r * cols + offset + c];
        }
        offset += width;
      }
      break;
    }
    case Op::kSliceCols:
      if (wants(0)) {
        const std::size_t rows = n.value.rows(), width = n.value.cols(),
                          cols = input(0).cols();
        auto d = grad(0).data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < width; ++c)
            d[r * cols + n.offset + c] += gd[r * width + c];
      }
      break;
    case Op::kSum:
      if (wants(0))
        for (double& v : grad(0).data()) v += gd[0];
      break;
    case Op::kStackSteps: {
      const std::size_t batch = n.value.dim(0), time = n.value.dim(1),
                        width = n.value.dim(2);
      for (std::size_t t = 0; t < time; ++t) {
        if (!wants(t)) continue;
        auto d = grad(t).data();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t h = 0; h < width; ++h)
            d[b * width + h] += gd[(b * time + t) * width + h];
      }
      break;
    }
    case Op::kAttentionScores: {
      const Tensor& m = input(0);
      const Tensor& q = input(1);
      const std::size_t batch = m.dim(0), time = m.dim(1), width = m.dim(2);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < time; ++t) {
          const double gbt = gd[b * time + t];
          const std::size_t mo = (b * time + t) * width;
          if (wants(0)) {
            auto dm = grad(0).data();
            for (std::size_t h = 0; h < width; ++h) dm[mo + h] += gbt * q[b * width + h];
          }
          if (wants(1)) {
            auto dq = grad(1).data();
            for (std::size_t h = 0; h < width; ++h) dq[b * width + h] += gbt * m[mo + h];
          }
        }
      }
      break;
    }
    case Op::kAttentionContext: {
      const Tensor& w = input(0);
      const Tensor& m = input(1);
      const std::size_t batch = m.dim(0), time = m.dim(1), width = m.dim(2);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* gb = gd.data() + b * width;
        for (std::size_t t = 0; t < time; ++t) {
          const std::size_t mo = (b * time + t) * width;
          if (wants(0)) {
            double s = 0.0;
            for (std::size_t h = 0; h < width; ++h) s += gb[h] * m[mo + h];
            grad(0)[b * time + t] += s;
          }
          if (wants(1)) {
            auto dm = grad(1).data();
            const double wt = w[b * time + t];
            for (std::size_t h = 0; h < width; ++h) dm[mo + h] += wt * gb[h];
          }
        }
      }
      break;
    }
    case Op::kCrossEntropy:
      if (wants(0)) {
        const int ignore_id = n.ignore_id;
        const std::size_t cols = n.aux.cols();
        const double coef = gd[0] / n.factor;
        auto p = n.aux.data();
        auto d = grad(0).data();
        for (std::size_t r = 0; r < n.ids.size(); ++r) {
          if (n.ids[r] == ignore_id) continue;
          const std::size_t base = r * cols;
          for (std::size_t c = 0; c < cols; ++c) d[base + c] += coef * p[base + c];
          d[base + n.ids[r]] -= coef;
        }
      }
      break;
  }
}

GradCheckResult grad_check(const ScalarFunction& f,
                           const std::vector<Tensor>& point, double step,
                           double floor) {
  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : at) vars.push_back(tape.parameter(t));
    return tape.value(f(tape, vars))[0];
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : point) vars.push_back(tape.parameter(t));
  const Gradients grads = tape.backward(f(tape, vars));

  GradCheckResult result;
  std::vector<Tensor> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double original = point[k][i];
      probe[k][i] = original + step;
      const double up = evaluate(probe);
      probe[k][i] = original - step;
      const double down = evaluate(probe);
      probe[k][i] = original;
      const double numeric = (up - down) / (2 * step);
      const double analytic = grads.of(vars[k])[i];
      const double abs_err = std::abs(analytic - numeric);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), floor});
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      result.max_relative_error =
          std::max(result.max_relative_error, abs_err / denom);
    }
  }
  return result;
}

}  // namespace xamr::ad

#include "gcm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gcm/errors.hpp"

namespace gcm {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

namespace {

thread_local Tape* g_active_tape = nullptr;

NodePtr new_node(Shape shape) {
  auto node = std::make_shared<TensorNode>();
  node->value.assign(shape_numel(shape), 0.0f);
  node->shape = std::move(shape);
  return node;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void check_finite(const TensorNode& out, const char* op) {
  for (float v : out.value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
  }
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// Attaches `out` to the active tape when any input needs a gradient.
template <typename Backward>
Tensor record(NodePtr out, std::vector<NodePtr> inputs, const char* op, bool grad,
              Backward&& backward) {
  check_finite(*out, op);
  if (grad) {
    out->requires_grad = true;
    out->leaf = false;
    g_active_tape->record(Tape::Entry{out, std::move(inputs), std::forward<Backward>(backward)});
  }
  return Tensor(std::move(out));
}

template <typename F>
Tensor unary(const Tensor& x, const char* op, F&& f, auto&& derivative) {
  require_defined(x, op);
  auto out = new_node(x.shape());
  const auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) out->value[i] = f(in[i]);
  const bool grad = wants_grad({&x});
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, op, grad, [xn, on, derivative]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += on->grad[i] * derivative(xn->value[i], on->value[i]);
    }
  });
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor reduce_axis(const Tensor& x, std::size_t axis, bool average, const char* op) {
  require_defined(x, op);
  if (axis >= x.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto out = new_node(out_shape);
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    float* dst = out->value.data() + o * s.inner;
    for (std::size_t e = 0; e < s.extent; ++e) {
      const float* src = in.data() + (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
    if (average && s.extent > 0) {
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] /= static_cast<float>(s.extent);
    }
  }
  const float factor = (average && s.extent > 0) ? 1.0f / static_cast<float>(s.extent) : 1.0f;
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, op, wants_grad({&x}), [xn, on, s, factor]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const float* go = on->grad.data() + o * s.inner;
      for (std::size_t e = 0; e < s.extent; ++e) {
        float* dst = gx.data() + (o * s.extent + e) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += go[i] * factor;
      }
    }
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = new_node(std::move(shape));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::filled(Shape shape, float value) {
  auto node = new_node(std::move(shape));
  std::fill(node->value.begin(), node->value.end(), value);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<float> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("dim: axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const float> Tensor::data() const {
  require_defined(*this, "data");
  return node_->value;
}

std::span<float> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  return node_->value;
}

float Tensor::item() const {
  if (numel() != 1) throw ContractError("item: tensor has " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

float Tensor::at(std::size_t i) const {
  if (i >= numel()) throw IndexError("at: index out of range");
  return node_->value[i];
}

float Tensor::at(std::size_t row, std::size_t col) const {
  require_rank2(*this, "at");
  if (row >= dim(0) || col >= dim(1)) throw IndexError("at: index out of range");
  return node_->value[row * dim(1) + col];
}

std::vector<float> Tensor::to_vector() const {
  const auto d = data();
  return {d.begin(), d.end()};
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  require_defined(*this, "set_requires_grad");
  if (!node_->leaf) throw ContractError("set_requires_grad: only leaves can change grad mode");
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
  return *this;
}

bool Tensor::is_leaf() const { return node_ && node_->leaf; }

std::vector<float> Tensor::grad() const {
  require_defined(*this, "grad");
  if (node_->grad.size() != node_->value.size()) return std::vector<float>(node_->value.size(), 0.0f);
  return node_->grad;
}

std::span<float> Tensor::mutable_grad() {
  require_defined(*this, "mutable_grad");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const { return from(shape(), to_vector(), false); }

Tensor Tensor::clone() const { return from(shape(), to_vector(), requires_grad()); }

// ---------------------------------------------------------------------------
// Tape

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + shape_string(loss.shape()));
  }
  TensorNode* target = loss.node().get();
  if (target->leaf) {
    if (target->requires_grad) target->grad_buffer()[0] += 1.0f;
    return;
  }
  auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                         [target](const Entry& e) { return e.output.get() == target; });
  if (it == entries_.rend()) throw ContractError("backward: loss was not produced on this tape");
  const auto last = static_cast<std::size_t>(std::distance(it, entries_.rend())) - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    auto& g = entries_[i].output->grad;
    g.assign(entries_[i].output->value.size(), 0.0f);
  }
  target->grad[0] = 1.0f;
  for (std::size_t i = last + 1; i-- > 0;) entries_[i].backward();
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) throw ContractError("backward: loss must be a scalar");
    if (loss.is_leaf()) {
      if (loss.requires_grad()) loss.node()->grad_buffer()[0] += 1.0f;
      return;
    }
    throw ContractError("backward: no active tape");
  }
  g_active_tape->backward(loss);
}

// ---------------------------------------------------------------------------
// kernels

namespace kernels {

void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
            std::size_t n) {
  std::fill(c, c + m * n, 0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    float* ci = c + i * n;
    const float* ai = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const float av = ai[kk];
      // Adding 0*b only ever adds a signed zero to a value that is never -0.
      if (av == 0.0f) continue;
      const float* bk = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void aggregate(const float* src, std::size_t d, std::span<const std::size_t> rows,
               Aggregation mode, float* out) {
  std::fill(out, out + d, 0.0f);
  for (std::size_t r : rows) {
    const float* s = src + r * d;
    for (std::size_t j = 0; j < d; ++j) out[j] += s[j];
  }
  if (mode == Aggregation::kMean && !rows.empty()) {
    const auto count = static_cast<float>(rows.size());
    for (std::size_t j = 0; j < d; ++j) out[j] /= count;
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  auto out = new_node({m, n});
  kernels::matmul(a.data().data(), b.data().data(), out->value.data(), m, k, n);
  TensorNode* an = a.node().get();
  TensorNode* bn = b.node().get();
  TensorNode* on = out.get();
  return record(out, {a.node(), b.node()}, "matmul", wants_grad({&a, &b}), [an, bn, on, m, k, n]() {
    if (on->grad.empty()) return;
    const float* go = on->grad.data();
    if (an->requires_grad) {
      float* ga = an->grad_buffer().data();
      const float* bv = bn->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          float acc = 0.0f;
          const float* gi = go + i * n;
          const float* bk = bv + kk * n;
          for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bk[j];
          ga[i * k + kk] += acc;
        }
      }
    }
    if (bn->requires_grad) {
      float* gb = bn->grad_buffer().data();
      const float* av = an->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const float* gi = go + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const float aik = av[i * k + kk];
          if (aik == 0.0f) continue;
          float* gbk = gb + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbk[j] += aik * gi[j];
        }
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_defined(x, "add_bias");
  require_defined(bias, "add_bias");
  require_rank2(x, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n || bias.rank() != 1) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                         shape_string(x.shape()));
  }
  auto out = new_node({m, n});
  const float* xv = x.data().data();
  const float* bv = bias.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = xv[i * n + j] + bv[j];
  }
  TensorNode* xn = x.node().get();
  TensorNode* bn = bias.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node(), bias.node()}, "add_bias", wants_grad({&x, &bias}),
                [xn, bn, on, m, n]() {
                  if (on->grad.empty()) return;
                  if (xn->requires_grad) {
                    auto& gx = xn->grad_buffer();
                    for (std::size_t i = 0; i < m * n; ++i) gx[i] += on->grad[i];
                  }
                  if (bn->requires_grad) {
                    auto& gb = bn->grad_buffer();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) gb[j] += on->grad[i * n + j];
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F&& f, DA&& da, DB&& db) {
  require_defined(a, op);
  require_defined(b, op);
  require_same_shape(a, b, op);
  auto out = new_node(a.shape());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = f(av[i], bv[i]);
  TensorNode* an = a.node().get();
  TensorNode* bn = b.node().get();
  TensorNode* on = out.get();
  return record(out, {a.node(), b.node()}, op, wants_grad({&a, &b}), [an, bn, on, da, db]() {
    if (on->grad.empty()) return;
    const std::size_t size = on->grad.size();
    if (an->requires_grad) {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < size; ++i) ga[i] += on->grad[i] * da(an->value[i], bn->value[i]);
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      for (std::size_t i = 0; i < size; ++i) gb[i] += on->grad[i] * db(an->value[i], bn->value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](float x, float y) { return x + y; }, [](float, float) { return 1.0f; },
      [](float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](float x, float y) { return x - y; }, [](float, float) { return 1.0f; },
      [](float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](float x, float y) { return x * y; }, [](float, float y) { return y; },
      [](float x, float) { return x; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "minimum", [](float x, float y) { return x <= y ? x : y; },
      [](float x, float y) { return x <= y ? 1.0f : 0.0f; },
      [](float x, float y) { return x <= y ? 0.0f : 1.0f; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "maximum", [](float x, float y) { return x >= y ? x : y; },
      [](float x, float y) { return x >= y ? 1.0f : 0.0f; },
      [](float x, float y) { return x >= y ? 0.0f : 1.0f; });
}

Tensor neg(const Tensor& x) {
  return unary(x, "neg", [](float v) { return -v; }, [](float, float) { return -1.0f; });
}

Tensor scale(const Tensor& x, float factor) {
  return unary(
      x, "scale", [factor](float v) { return v * factor; },
      [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& x, float value) {
  return unary(
      x, "add_scalar", [value](float v) { return v + value; }, [](float, float) { return 1.0f; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](float v) {
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
  require_defined(x, "log");
  for (float v : x.data()) {
    if (!(v > 0.0f)) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(x, "log", [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      x, "clamp", [lo, hi](float v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](float v, float) { return (v >= lo && v <= hi) ? 1.0f : 0.0f; });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& x, std::size_t axis) { return reduce_axis(x, axis, false, "sum"); }

Tensor mean(const Tensor& x, std::size_t axis) { return reduce_axis(x, axis, true, "mean"); }

Tensor sum_all(const Tensor& x) { return reduce_axis(reshape(x, {x.numel()}), 0, false, "sum_all"); }

Tensor mean_all(const Tensor& x) {
  return reduce_axis(reshape(x, {x.numel()}), 0, true, "mean_all");
}

// ---------------------------------------------------------------------------
// indexing & layout

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_defined(x, "gather_rows");
  require_rank2(x, "gather_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw IndexError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                       std::to_string(n) + " rows");
    }
  }
  auto out = new_node({indices.size(), d});
  const float* xv = x.data().data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(xv + indices[r] * d, d, out->value.data() + r * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "gather_rows", wants_grad({&x}), [xn, on, idx = std::move(idx), d]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) gx[idx[r] * d + j] += on->grad[r * d + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::initializer_list<std::size_t> indices) {
  return gather_rows(x, std::span<const std::size_t>(indices.begin(), indices.size()));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_rows");
  require_rank2(x, "slice_rows");
  const std::size_t d = x.dim(1);
  if (begin + count > x.dim(0)) throw IndexError("slice_rows: range out of bounds");
  auto out = new_node({count, d});
  std::copy_n(x.data().data() + begin * d, count * d, out->value.data());
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "slice_rows", wants_grad({&x}), [xn, on, begin, d]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < on->grad.size(); ++i) gx[begin * d + i] += on->grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_cols");
  require_rank2(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin + count > n) throw IndexError("slice_cols: range out of bounds");
  auto out = new_node({m, count});
  const float* xv = x.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(xv + i * n + begin, count, out->value.data() + i * count);
  }
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "slice_cols", wants_grad({&x}), [xn, on, m, n, begin, count]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += on->grad[i * count + j];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  std::size_t rows = 0;
  const std::size_t d = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
  bool grad = false;
  std::vector<NodePtr> inputs;
  for (const Tensor& p : parts) {
    require_defined(p, "concat_rows");
    require_rank2(p, "concat_rows");
    if (p.dim(1) != d) throw DimensionError("concat_rows: column counts differ");
    rows += p.dim(0);
    grad = grad || wants_grad({&p});
    inputs.push_back(p.node());
  }
  auto out = new_node({rows, d});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->value.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.numel();
  }
  std::vector<TensorNode*> raw;
  for (const auto& n : inputs) raw.push_back(n.get());
  TensorNode* on = out.get();
  return record(out, std::move(inputs), "concat_rows", grad, [raw = std::move(raw), on]() {
    if (on->grad.empty()) return;
    std::size_t offset = 0;
    for (TensorNode* p : raw) {
      const std::size_t size = p->value.size();
      if (p->requires_grad) {
        auto& gp = p->grad_buffer();
        for (std::size_t i = 0; i < size; ++i) gp[i] += on->grad[offset + i];
      }
      offset += size;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  auto out = new_node(std::move(shape));
  std::copy(x.data().begin(), x.data().end(), out->value.begin());
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "reshape", wants_grad({&x}), [xn, on]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
  });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> columns) {
  require_defined(x, "pick");
  require_rank2(x, "pick");
  const std::size_t m = x.dim(0), k = x.dim(1);
  if (columns.size() != m) throw DimensionError("pick: need one column per row");
  for (std::size_t c : columns) {
    if (c >= k) throw IndexError("pick: column " + std::to_string(c) + " out of range");
  }
  auto out = new_node({m});
  for (std::size_t i = 0; i < m; ++i) out->value[i] = x.data()[i * k + columns[i]];
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "pick", wants_grad({&x}), [xn, on, cols = std::move(cols), k]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < cols.size(); ++i) gx[i * k + cols[i]] += on->grad[i];
  });
}

Tensor aggregate_rows(const Tensor& x, std::span<const std::vector<std::size_t>> neighbors,
                      Aggregation mode) {
  require_defined(x, "aggregate_rows");
  require_rank2(x, "aggregate_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<std::vector<std::size_t>> lists(neighbors.begin(), neighbors.end());
  for (auto& list : lists) {
    std::sort(list.begin(), list.end());
    for (std::size_t j : list) {
      if (j >= n) throw IndexError("aggregate_rows: neighbor " + std::to_string(j) + " out of range");
    }
  }
  auto out = new_node({lists.size(), d});
  for (std::size_t r = 0; r < lists.size(); ++r) {
    kernels::aggregate(x.data().data(), d, lists[r], mode, out->value.data() + r * d);
  }
  TensorNode* xn = x.node().get();
  TensorNode* on = out.get();
  return record(out, {x.node()}, "aggregate_rows", wants_grad({&x}),
                [xn, on, lists = std::move(lists), d, mode]() {
                  if (on->grad.empty() || !xn->requires_grad) return;
                  auto& gx = xn->grad_buffer();
                  for (std::size_t r = 0; r < lists.size(); ++r) {
                    if (lists[r].empty()) continue;
                    const float w = mode == Aggregation::kMean
                                        ? 1.0f / static_cast<float>(lists[r].size())
                                        : 1.0f;
                    const float* go = on->grad.data() + r * d;
                    for (std::size_t j : lists[r]) {
                      for (std::size_t c = 0; c < d; ++c) gx[j * d + c] += go[c] * w;
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// categorical

Tensor log_softmax(const Tensor& logits) {
  require_defined(logits, "log_softmax");
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw DimensionError("log_softmax: expected a vector or matrix");
  }
  const std::size_t k = logits.shape().back();
  if (k == 0) throw DimensionError("log_softmax: empty class dimension");
  const std::size_t m = logits.numel() / k;
  auto out = new_node(logits.shape());
  const float* xv = logits.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const float* row = xv + i * k;
    const float peak = *std::max_element(row, row + k);
    float total = 0.0f;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - peak);
    const float log_total = std::log(total);
    for (std::size_t j = 0; j < k; ++j) out->value[i * k + j] = row[j] - peak - log_total;
  }
  TensorNode* xn = logits.node().get();
  TensorNode* on = out.get();
  return record(out, {logits.node()}, "log_softmax", wants_grad({&logits}), [xn, on, m, k]() {
    if (on->grad.empty() || !xn->requires_grad) return;
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const float* go = on->grad.data() + i * k;
      const float* y = on->value.data() + i * k;
      float total = 0.0f;
      for (std::size_t j = 0; j < k; ++j) total += go[j];
      for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += go[j] - std::exp(y[j]) * total;
    }
  });
}

Categorical categorical(const Tensor& logits) {
  Categorical c;
  c.log_probs = log_softmax(logits);
  c.probs = exp(c.log_probs);
  c.entropy = neg(sum(mul(c.probs, c.log_probs), logits.rank() - 1));
  return c;
}

}  // namespace gcm

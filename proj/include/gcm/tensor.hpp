#pragma once

// Dense float32 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to shared storage. Ops record themselves on the
// thread's active Tape (see TapeScope) when at least one input requires a
// gradient; with no active tape, ops are plain forward computations.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gcm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until first touched
  bool requires_grad = false;
  bool leaf = true;

  std::vector<float>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, float value);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);
  static Tensor vector(std::vector<float> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  // Writable view; only meaningful for leaves (parameters, inputs).
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t i) const;
  float at(std::size_t row, std::size_t col) const;
  std::vector<float> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  // Gradient buffer; zeros when nothing has been accumulated yet.
  std::vector<float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Constant copy, disconnected from any tape.
  Tensor detach() const;
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

class Tape {
 public:
  struct Entry {
    std::shared_ptr<detail::TensorNode> output;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Entry entry);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Replays backward rules in reverse order starting at `loss`. Leaf gradients
  // accumulate across calls until zero_grad; intermediate gradients are reset.
  void backward(const Tensor& loss);

  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<Entry> entries_;
};

// Makes `tape` the active tape of the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the current thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Backward on the active tape.
void backward(const Tensor& loss);

// --- linear algebra -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
// x[m x n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// --- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, float factor);
Tensor add_scalar(const Tensor& x, float value);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, float lo, float hi);

// --- reductions -----------------------------------------------------------
Tensor sum(const Tensor& x, std::size_t axis);
// Mean over an axis of extent 0 yields zeros of the reduced shape.
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// --- indexing & layout ----------------------------------------------------
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor gather_rows(const Tensor& x, std::initializer_list<std::size_t> indices);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor reshape(const Tensor& x, Shape shape);
// x[m x k], one column index per row -> [m].
Tensor pick(const Tensor& x, std::span<const std::size_t> columns);

enum class Aggregation { kSum, kMean };

// Row r of the result aggregates rows `neighbors[r]` of x[n x d]. Neighbor
// order is canonicalized, so any permutation of a list gives identical bits.
// An empty list aggregates to the zero vector under both modes.
Tensor aggregate_rows(const Tensor& x, std::span<const std::vector<std::size_t>> neighbors,
                      Aggregation mode);

// --- categorical heads ----------------------------------------------------
// Row-wise log-softmax computed with a max shift.
Tensor log_softmax(const Tensor& logits);

struct Categorical {
  Tensor probs;      // same shape as logits
  Tensor log_probs;  // same shape as logits
  Tensor entropy;    // one entry per row
};

Categorical categorical(const Tensor& logits);

namespace kernels {

// C[m x n] = A[m x k] * B[k x n]. Each output element accumulates over k in
// ascending order starting from +0, independent of m.
void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
            std::size_t n);
// out[d] = agg of rows `rows` (sorted ascending) of src[* x d].
void aggregate(const float* src, std::size_t d, std::span<const std::size_t> rows,
               Aggregation mode, float* out);

}  // namespace kernels

}  // namespace gcm

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every tensor is two-dimensional (rows x cols); scalars are 1x1. Operations
// record their parents and a backward rule when any input requires a
// gradient, so the graph is built implicitly during the forward pass.
// `backward(loss)` topologically sorts the graph reachable from the loss,
// propagates gradients, and then releases the graph.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace semnav::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool released = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::span<const double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Direct write access for optimizers and checkpoint loading.
  Matrix& mutable_value() { return node_->value; }

  // Gradient buffer; zero-sized until a backward pass reaches the tensor.
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                            std::function<void(Node&)> backward_fn);

  std::shared_ptr<Node> node_;
};

// Builds an op result; records the backward rule only if some input is tracked.
Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);
// Adds g to target's gradient buffer; a no-op for untracked nodes. For use
// inside backward rules.
void accumulate(Node& target, const Matrix& g);

// Populates grads of every tracked tensor reachable from `loss` (must be 1x1)
// and releases the graph. Calling it twice on the same loss throws.
void backward(const Tensor& loss);

// --- linear algebra -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// --- elementwise, with broadcasting of 1x1, 1xC and Rx1 operands ------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);
// Gradient is 1 strictly inside (lo, hi) and 0 elsewhere.
Tensor clamp(const Tensor& a, double lo, double hi = std::numeric_limits<double>::infinity());

// --- reductions -----------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Row-wise Euclidean norm (R x 1); the subgradient at a zero row is 0.
Tensor l2norm(const Tensor& a);
// Row-wise dot product of equally shaped tensors (R x 1).
Tensor dot(const Tensor& a, const Tensor& b);
Tensor normalize_rows(const Tensor& a);
Tensor softmax(const Tensor& a);
Tensor logsumexp(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);
// Per-row cross entropy of `logits` against class indices (R x 1).
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// --- shape ----------------------------------------------------------------
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// --- optimizer ------------------------------------------------------------
struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

AdamState make_adam_state(std::span<const NamedParameter> params, AdamOptions options = {});

// One bias-corrected Adam update of every parameter from its current grad.
// A parameter without a grad is treated as having a zero gradient. Throws
// std::runtime_error naming the parameter when a gradient is non-finite.
void adam_step(std::span<NamedParameter> params, AdamState& state);

void zero_grad(std::span<NamedParameter> params);

}  // namespace semnav::ag

#include "semnav/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace semnav::ag {

void accumulate(Node& target, const Matrix& g) {
  if (!target.requires_grad) return;
  if (target.grad.size() == 0) {
    target.grad = g;
  } else {
    target.grad += g;
  }
}

namespace {

bool broadcastable(Eigen::Index from, Eigen::Index to) { return from == to || from == 1; }

void broadcast_shape(const Tensor& a, const Tensor& b, Eigen::Index& rows, Eigen::Index& cols,
                     const char* op) {
  rows = std::max(a.rows(), b.rows());
  cols = std::max(a.cols(), b.cols());
  if (!broadcastable(a.rows(), rows) || !broadcastable(a.cols(), cols) ||
      !broadcastable(b.rows(), rows) || !broadcastable(b.cols(), cols)) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return requires_grad ? parameter(std::move(m)) : constant(std::move(m));
}

Tensor Tensor::row(std::span<const double> values, bool requires_grad) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return requires_grad ? parameter(std::move(m)) : constant(std::move(m));
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() requires a 1x1 tensor");
  return node_->value(0, 0);
}

Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool tracked =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tracked) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward: loss must be scalar");
  Node* root = loss.node().get();
  if (root->released) throw std::logic_error("backward: graph already consumed by a previous backward pass");
  if (!root->requires_grad) throw std::invalid_argument("backward: loss does not depend on tracked tensors");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !parent->parents.empty() && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
  for (Node* node : order) {
    node->parents.clear();
    node->backward_fn = nullptr;
    node->released = true;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Matrix ga(pa.value.rows(), pa.value.cols());
      ga.noalias() = self.grad * pb.value.transpose();
      accumulate(pa, ga);
    }
    if (pb.requires_grad) {
      Matrix gb(pb.value.rows(), pb.value.cols());
      gb.noalias() = pa.value.transpose() * self.grad;
      accumulate(pb, gb);
    }
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.transpose());
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  broadcast_shape(a, b, r, c, "add");
  Matrix out = expand(a.value(), r, c) + expand(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) accumulate(*p, reduce_to(self.grad, p->value.rows(), p->value.cols()));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  broadcast_shape(a, b, r, c, "sub");
  Matrix out = expand(a.value(), r, c) - expand(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    accumulate(pa, reduce_to(self.grad, pa.value.rows(), pa.value.cols()));
    if (pb.requires_grad) accumulate(pb, reduce_to(-self.grad, pb.value.rows(), pb.value.cols()));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  broadcast_shape(a, b, r, c, "mul");
  Matrix out = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto r = self.grad.rows();
    const auto c = self.grad.cols();
    if (pa.requires_grad) {
      accumulate(pa, reduce_to(self.grad.cwiseProduct(expand(pb.value, r, c)), pa.value.rows(), pa.value.cols()));
    }
    if (pb.requires_grad) {
      accumulate(pb, reduce_to(self.grad.cwiseProduct(expand(pa.value, r, c)), pb.value.rows(), pb.value.cols()));
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  broadcast_shape(a, b, r, c, "div");
  Matrix out = expand(a.value(), r, c).cwiseQuotient(expand(b.value(), r, c));
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto r = self.grad.rows();
    const auto c = self.grad.cols();
    const Matrix bb = expand(pb.value, r, c);
    if (pa.requires_grad) {
      accumulate(pa, reduce_to(self.grad.cwiseQuotient(bb), pa.value.rows(), pa.value.cols()));
    }
    if (pb.requires_grad) {
      const Matrix aa = expand(pa.value, r, c);
      Matrix g = -self.grad.cwiseProduct(aa).cwiseQuotient(bb.cwiseProduct(bb));
      accumulate(pb, reduce_to(g, pb.value.rows(), pb.value.cols()));
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value() * s;
  return make_result(std::move(out), {a}, [s](Node& self) { accumulate(*self.parents[0], self.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  Matrix out = a.value().array() + s;
  return make_result(std::move(out), {a}, [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = (p.value.array() > 0.0).select(self.grad, 0.0);
    accumulate(p, g);
  });
}

Tensor sin(const Tensor& a) {
  Matrix out = a.value().array().sin();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, self.grad.cwiseProduct(Matrix(p.value.array().cos())));
  });
}

Tensor cos(const Tensor& a) {
  Matrix out = a.value().array().cos();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, -self.grad.cwiseProduct(Matrix(p.value.array().sin())));
  });
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp();
  return make_result(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.cwiseProduct(self.value));
  });
}

Tensor abs(const Tensor& a) {
  Matrix out = a.value().cwiseAbs();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix sign = p.value.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
    accumulate(p, self.grad.cwiseProduct(sign));
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a}, [lo, hi](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = (p.value.array() > lo && p.value.array() < hi).select(self.grad, 0.0);
    accumulate(p, g);
  });
}

Tensor sum(const Tensor& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, Matrix::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor l2norm(const Tensor& a) {
  Matrix out = a.value().rowwise().norm();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix g(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      const double n = self.value(i, 0);
      if (n > 0.0) {
        g.row(i) = p.value.row(i) * (self.grad(i, 0) / n);
      } else {
        g.row(i).setZero();
      }
    }
    accumulate(p, g);
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto cols = pa.value.cols();
    if (pa.requires_grad) accumulate(pa, pb.value.cwiseProduct(self.grad.replicate(1, cols)));
    if (pb.requires_grad) accumulate(pb, pa.value.cwiseProduct(self.grad.replicate(1, cols)));
  });
}

Tensor normalize_rows(const Tensor& a) { return div(a, l2norm(a)); }

Tensor softmax(const Tensor& a) {
  if (a.cols() == 0) throw std::invalid_argument("softmax: empty axis");
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    // dL/dx = y * (g - <g, y>)
    Eigen::VectorXd inner = self.grad.cwiseProduct(self.value).rowwise().sum();
    Matrix g = self.value.cwiseProduct(self.grad - inner.replicate(1, self.value.cols()));
    accumulate(p, g);
  });
}

Tensor logsumexp(const Tensor& a) {
  if (a.cols() == 0) throw std::invalid_argument("logsumexp: empty axis");
  Matrix out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    out(i, 0) = m + std::log((a.value().row(i).array() - m).exp().sum());
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix g(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      g.row(i) = (p.value.row(i).array() - self.value(i, 0)).exp() * self.grad(i, 0);
    }
    accumulate(p, g);
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.value().size() == 0) throw std::invalid_argument("mse: empty tensor");
  const Matrix diff = a.value() - b.value();
  const double n = static_cast<double>(diff.size());
  Matrix out = Matrix::Constant(1, 1, diff.squaredNorm() / n);
  return make_result(std::move(out), {a, b}, [diff, n](Node& self) {
    const Matrix g = diff * (2.0 * self.grad(0, 0) / n);
    accumulate(*self.parents[0], g);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], -g);
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.cols() == 0) throw std::invalid_argument("cross_entropy: empty class axis");
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw std::invalid_argument("cross_entropy: one target per row required");
  }
  const Tensor lse = logsumexp(logits);
  Matrix picked(logits.rows(), 1);
  std::vector<int> idx(targets.begin(), targets.end());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = idx[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw std::invalid_argument("cross_entropy: target out of range");
    picked(i, 0) = logits.value()(i, t);
  }
  Tensor chosen = make_result(std::move(picked), {logits}, [idx](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, idx[static_cast<std::size_t>(i)]) = self.grad(i, 0);
    accumulate(p, g);
  });
  return sub(lse, chosen);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
    Eigen::Index at = 0;
    for (auto& p : self.parents) {
      const auto c = p->value.cols();
      if (p->requires_grad) accumulate(*p, self.grad.middleCols(at, c));
      at += c;
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
    Eigen::Index at = 0;
    for (auto& p : self.parents) {
      const auto r = p->value.rows();
      if (p->requires_grad) accumulate(*p, self.grad.middleRows(at, r));
      at += r;
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) throw std::out_of_range("slice_rows: range");
  Matrix out = a.value().middleRows(begin, count);
  return make_result(std::move(out), {a}, [begin, count](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g.middleRows(begin, count) = self.grad;
    accumulate(p, g);
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw std::out_of_range("slice_cols: range");
  Matrix out = a.value().middleCols(begin, count);
  return make_result(std::move(out), {a}, [begin, count](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g.middleCols(begin, count) = self.grad;
    accumulate(p, g);
  });
}

}  // namespace semnav::ag

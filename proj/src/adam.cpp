#include "semnav/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace semnav::ag {

AdamState make_adam_state(std::span<const NamedParameter> params, AdamOptions options) {
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    state.second_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
  return state;
}

void adam_step(std::span<NamedParameter> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: parameter count does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i].tensor;
    if (t.rows() != state.first_moment[i].rows() || t.cols() != state.first_moment[i].cols()) {
      throw std::invalid_argument("adam_step: shape of '" + params[i].name + "' changed");
    }
    if (t.has_grad() && !t.grad().allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in parameter '" + params[i].name + "'");
    }
  }

  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (t.has_grad()) {
      const Matrix& g = t.grad();
      m = o.beta1 * m + (1.0 - o.beta1) * g;
      v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
    } else {
      m *= o.beta1;
      v *= o.beta2;
    }
    const Matrix update = (m / c1).array() / ((v / c2).array().sqrt() + o.eps);
    t.mutable_value() -= o.lr * update;
  }
}

void zero_grad(std::span<NamedParameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace semnav::ag

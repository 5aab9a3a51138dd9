#include "semnav/analytic_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semnav {

namespace {

constexpr double kStep = 1e-6;

}  // namespace

AnalyticField::AnalyticField(Scene scene, EmbeddingTable table, double temperature)
    : scene_(std::move(scene)), table_(std::move(table)), labels_(scene_.labels()), temperature_(temperature) {
  validate(scene_);
  if (!(temperature_ > 0.0)) throw std::invalid_argument("analytic field: temperature must be positive");
  for (const auto& l : labels_) {
    if (!table_.contains(l)) throw std::invalid_argument("analytic field: no embedding for '" + l + "'");
  }
}

Eigen::VectorXd AnalyticField::semantic(const Vec& p) const {
  std::vector<double> d(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) d[i] = std::max(label_sdf(scene_, labels_[i], p), 0.0);
  const double nearest = *std::min_element(d.begin(), d.end());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(table_.dim());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    v += std::exp(-(d[i] - nearest) / temperature_) * table_.at(labels_[i]);
  }
  return v / v.norm();
}

FieldOutput AnalyticField::evaluate(const ag::Tensor& points) const {
  const ag::Matrix& x = points.value();
  const auto n = x.rows();
  const auto dim = x.cols();
  if (dim != scene_.dimension) throw std::invalid_argument("analytic field: point dimension mismatch");
  const auto e = table_.dim();

  ag::Matrix sdf(n, 1);
  ag::Matrix sem(n, e);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec p = x.row(i).transpose();
    sdf(i, 0) = analytic_sdf(scene_, p);
    sem.row(i) = semantic(p).transpose();
  }
  if (!points.requires_grad()) {
    return {ag::Tensor::constant(std::move(sdf)), ag::Tensor::constant(std::move(sem))};
  }

  // Per-point Jacobians: sdf (1 x D) and sem (E x D).
  ag::Matrix sdf_grad(n, dim);
  std::vector<Eigen::MatrixXd> sem_jac(static_cast<std::size_t>(n), Eigen::MatrixXd(e, dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      Vec lo = x.row(i).transpose();
      Vec hi = lo;
      lo[k] -= kStep;
      hi[k] += kStep;
      sdf_grad(i, k) = (analytic_sdf(scene_, hi) - analytic_sdf(scene_, lo)) / (2.0 * kStep);
      sem_jac[static_cast<std::size_t>(i)].col(k) = (semantic(hi) - semantic(lo)) / (2.0 * kStep);
    }
  }
  ag::Tensor sdf_t = ag::make_result(std::move(sdf), {points}, [sdf_grad](ag::Node& self) {
    ag::accumulate(*self.parents[0], (sdf_grad.array().colwise() * self.grad.col(0).array()).matrix());
  });
  ag::Tensor sem_t = ag::make_result(std::move(sem), {points}, [jac = std::move(sem_jac), dim](ag::Node& self) {
    ag::Matrix g(self.grad.rows(), dim);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      g.row(i) = self.grad.row(i) * jac[static_cast<std::size_t>(i)];
    }
    ag::accumulate(*self.parents[0], g);
  });
  return {std::move(sdf_t), std::move(sem_t)};
}

}  // namespace semnav

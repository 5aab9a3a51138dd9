// Central-difference gradient checks for the autograd ops and composite losses.
#pragma once

#include "semnav/autograd.hpp"
#include "semnav/field.hpp"
#include "semnav/planner.hpp"
#include "semnav/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gradcheck {

using semnav::ag::Matrix;
using semnav::ag::Tensor;
namespace ag = semnav::ag;

struct Result {
  double max_rel = 0.0;
  int entries = 0;
};

// |a - n| / max(|a|, |n|, floor)
inline double rel_error(double a, double n, double floor = 1e-3) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// `f` must rebuild its graph from the current values of `inputs`. With
// max_entries > 0 only that many random entries per input are probed.
inline Result check(std::vector<Tensor> inputs, const std::function<Tensor()>& f, std::uint64_t seed = 0,
                    int max_entries = 0, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  ag::backward(f());
  Result r;
  std::mt19937_64 rng(seed);
  for (auto& t : inputs) {
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(t.value().size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    if (max_entries > 0 && static_cast<int>(idx.size()) > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(max_entries));
    }
    for (Eigen::Index k : idx) {
      double& v = t.mutable_value().data()[k];
      const double saved = v;
      v = saved + h;
      const double up = f().item();
      v = saved - h;
      const double down = f().item();
      v = saved;
      r.max_rel = std::max(r.max_rel, rel_error(analytic.data()[k], (up - down) / (2 * h)));
      ++r.entries;
    }
  }
  return r;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double min_abs = 0.0) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x = g(rng);
    // Keeps kinked ops away from their kinks.
    if (std::abs(x) < min_abs) x = std::copysign(min_abs + std::abs(x), x);
    m.data()[i] = x;
  }
  return m;
}

// Weighted sum, so every output entry gets a distinct upstream gradient.
inline Tensor reduce(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return ag::sum(ag::mul(out, Tensor::constant(random_matrix(out.rows(), out.cols(), rng))));
}

struct Case {
  std::string name;
  std::function<Result(std::uint64_t seed)> run;
};

inline Case unary(std::string name, std::function<Tensor(const Tensor&)> op, Eigen::Index rows, Eigen::Index cols,
                  double min_abs = 0.0) {
  return {name, [=](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            Tensor a = Tensor::parameter(random_matrix(rows, cols, rng, min_abs));
            return check({a}, [&] { return reduce(op(a), seed); }, seed);
          }};
}

inline Case binary(std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, Eigen::Index ar,
                   Eigen::Index ac, Eigen::Index br, Eigen::Index bc, double b_offset = 0.0) {
  return {name, [=](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            Tensor a = Tensor::parameter(random_matrix(ar, ac, rng));
            Matrix bm = random_matrix(br, bc, rng);
            bm.array() += b_offset;
            Tensor b = Tensor::parameter(bm);
            return check({a, b}, [&] { return reduce(op(a, b), seed); }, seed);
          }};
}

// A small field and a batch drawn from a clean capture, shared by the loss checks.
struct LossFixture {
  semnav::FrameDataset frames;
  semnav::EmbeddingTable table;
  semnav::Scene scene;
};

inline const LossFixture& loss_fixture() {
  static const LossFixture fx = [] {
    LossFixture f;
    f.scene = semnav::bundled_scene("single_disk");
    semnav::CaptureConfig cc;
    cc.spacing = 0.8;
    f.frames = semnav::capture_scene(f.scene, cc);
    f.table = semnav::synth_table(f.frames.vocabulary, 16, 1);
    return f;
  }();
  return fx;
}

// Full training loss (affordance + weighted symmetric InfoNCE) against the
// network parameters, on a small network and batch.
inline Result full_loss_check(std::uint64_t seed) {
  const LossFixture& fx = loss_fixture();
  semnav::FieldConfig fc = semnav::default_field_config(fx.scene, seed);
  fc.width = 16;
  fc.layers = 2;
  fc.fourier_bands = 2;
  fc.sem_dim = 16;
  semnav::FieldModel model(fc);
  semnav::TrainConfig tc;
  tc.batch_size = 24;
  tc.frames_per_batch = 2;
  tc.samples_per_ray = 4;
  tc.lambda_s = 0.7;
  tc.seed = seed;
  semnav::Rng rng(seed);
  const semnav::SampleBatch batch = semnav::sample_batch(fx.frames, fx.table, tc, rng);
  std::vector<Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  return check(params, [&] { return semnav::loss_total(batch, model, tc).total; }, seed, 24);
}

// Field outputs against the query coordinates.
inline Result input_gradient_check(std::uint64_t seed) {
  const LossFixture& fx = loss_fixture();
  semnav::FieldConfig fc = semnav::default_field_config(fx.scene, seed);
  fc.width = 32;
  semnav::FieldModel model(fc);
  std::mt19937_64 rng(seed);
  Matrix pts(6, 2);
  std::uniform_real_distribution<double> u(0.3, 2.9);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
  Tensor p = Tensor::parameter(pts);
  return check({p}, [&] {
    const semnav::FieldOutput out = model.evaluate(p);
    return ag::add(reduce(out.sdf, seed), reduce(out.sem, seed + 1));
  }, seed);
}

inline std::vector<Case> op_cases() {
  using namespace semnav::ag;
  std::vector<Case> c;
  c.push_back(binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, 7, 5, 5, 3));
  c.push_back(unary("transpose", [](const Tensor& a) { return transpose(a); }, 4, 3));
  c.push_back(binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, 4, 3, 4, 3));
  c.push_back(binary("add_row_broadcast", [](const Tensor& a, const Tensor& b) { return add(a, b); }, 4, 3, 1, 3));
  c.push_back(binary("sub_col_broadcast", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, 4, 3, 4, 1));
  c.push_back(binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, 4, 3, 4, 3));
  c.push_back(binary("mul_scalar_broadcast", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, 4, 3, 1, 1));
  c.push_back(binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, 4, 3, 4, 3, 4.0));
  c.push_back(unary("scale", [](const Tensor& a) { return scale(a, -2.5); }, 3, 3));
  c.push_back(unary("add_scalar", [](const Tensor& a) { return mul(add_scalar(a, 0.7), a); }, 3, 3));
  c.push_back(unary("neg", [](const Tensor& a) { return neg(a); }, 3, 3));
  c.push_back(unary("relu", [](const Tensor& a) { return relu(a); }, 5, 4, 1e-2));
  c.push_back(unary("sin", [](const Tensor& a) { return sin(a); }, 5, 4));
  c.push_back(unary("cos", [](const Tensor& a) { return cos(a); }, 5, 4));
  c.push_back(unary("exp", [](const Tensor& a) { return exp(a); }, 5, 4));
  c.push_back(unary("abs", [](const Tensor& a) { return abs(a); }, 5, 4, 1e-2));
  c.push_back(unary("clamp", [](const Tensor& a) { return clamp(a, -0.5, 0.8); }, 6, 5, 1e-2));
  c.push_back(unary("clamp_hinge", [](const Tensor& a) { return clamp(a, 0.0); }, 6, 5, 1e-2));
  c.push_back(unary("sum", [](const Tensor& a) { return mul(sum(a), sum(a)); }, 4, 3));
  c.push_back(unary("mean", [](const Tensor& a) { return mul(mean(a), sum(a)); }, 4, 3));
  c.push_back(unary("l2norm", [](const Tensor& a) { return l2norm(a); }, 5, 3));
  c.push_back(binary("dot", [](const Tensor& a, const Tensor& b) { return dot(a, b); }, 5, 3, 5, 3));
  c.push_back(unary("normalize_rows", [](const Tensor& a) { return normalize_rows(a); }, 5, 4));
  c.push_back(unary("softmax", [](const Tensor& a) { return softmax(a); }, 4, 6));
  c.push_back(unary("logsumexp", [](const Tensor& a) { return logsumexp(a); }, 4, 6));
  c.push_back(binary("mse", [](const Tensor& a, const Tensor& b) { return mse(a, b); }, 6, 1, 6, 1));
  c.push_back({"cross_entropy", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor a = Tensor::parameter(random_matrix(5, 4, rng));
                 const std::vector<int> targets{0, 3, 1, 1, 2};
                 return check({a}, [&] { return reduce(cross_entropy(a, targets), seed); }, seed);
               }});
  c.push_back(binary("concat_cols", [](const Tensor& a, const Tensor& b) {
                       const Tensor parts[] = {a, b};
                       return concat_cols(parts);
                     }, 3, 2, 3, 4));
  c.push_back(binary("concat_rows", [](const Tensor& a, const Tensor& b) {
                       const Tensor parts[] = {a, b};
                       return concat_rows(parts);
                     }, 2, 3, 4, 3));
  c.push_back(unary("slice_rows", [](const Tensor& a) { return slice_rows(a, 1, 3); }, 5, 3));
  c.push_back(unary("slice_cols", [](const Tensor& a) { return slice_cols(a, 2, 2); }, 3, 5));
  c.push_back({"loss_semantic", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor pred = Tensor::parameter(random_matrix(6, 8, rng));
                 Matrix tgt = random_matrix(6, 8, rng);
                 tgt.row(4) = tgt.row(1);
                 tgt.rowwise().normalize();
                 Eigen::VectorXd delta = random_matrix(6, 1, rng).col(0).cwiseAbs();
                 return check({pred}, [&] {
                   return semnav::loss_semantic(ag::normalize_rows(pred), Tensor::constant(tgt), delta, 0.5, 0.1);
                 }, seed);
               }});
  c.push_back({"planner_losses", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Matrix pts = random_matrix(6, 2, rng);
                 Tensor p = Tensor::parameter(pts);
                 Tensor sdf = Tensor::parameter(random_matrix(6, 1, rng, 1e-2));
                 return check({p, sdf}, [&] {
                   return ag::add(ag::add(semnav::loss_spacing(p), semnav::loss_length(p)),
                                  semnav::loss_obstacle(sdf, 0.0));
                 }, seed);
               }});
  c.push_back({"field_training_loss", full_loss_check});
  c.push_back({"field_input_gradient", input_gradient_check});
  return c;
}

}  // namespace gradcheck

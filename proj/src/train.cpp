#include "semnav/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace semnav {

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be at least 2");
  if (frames_per_batch < 1) throw std::invalid_argument("train: frames_per_batch must be positive");
  if (steps < 0) throw std::invalid_argument("train: steps must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(lambda_r >= 0.0) || !(lambda_s >= 0.0) || lambda_r + lambda_s == 0.0) {
    throw std::invalid_argument("train: loss weights must be non-negative and not both zero");
  }
  if (samples_per_ray < 1) throw std::invalid_argument("train: samples_per_ray must be positive");
  if (!(behind_fraction >= 0.0 && behind_fraction < 1.0)) {
    throw std::invalid_argument("train: behind_fraction must lie in [0, 1)");
  }
  if (!(behind_depth >= 0.0)) throw std::invalid_argument("train: behind_depth must be non-negative");
  if (!(near_fraction >= 0.0 && near_fraction <= 1.0)) {
    throw std::invalid_argument("train: near_fraction must lie in [0, 1]");
  }
  if (!(near_depth > 0.0)) throw std::invalid_argument("train: near_depth must be positive");
  if (!(weight_temperature > 0.0) || !(logit_temperature > 0.0)) {
    throw std::invalid_argument("train: temperatures must be positive");
  }
}

SampleBatch sample_batch(const FrameDataset& frames, const EmbeddingTable& table, const TrainConfig& config,
                         Rng& rng) {
  config.validate();
  std::vector<int> eligible;
  for (std::size_t i = 0; i < frames.frames.size(); ++i) {
    const auto& f = frames.frames[i];
    if (std::any_of(f.depth.begin(), f.depth.end(), [](double d) { return d > 0.0; })) {
      eligible.push_back(static_cast<int>(i));
    }
  }
  if (eligible.empty()) throw std::runtime_error("sample_batch: no frame has a valid depth");

  // Partial Fisher-Yates draw of distinct frames.
  const int nf = std::min<int>(config.frames_per_batch, static_cast<int>(eligible.size()));
  for (int i = 0; i < nf; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(eligible.size()) - 1);
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[static_cast<std::size_t>(pick(rng))]);
  }
  eligible.resize(static_cast<std::size_t>(nf));

  const int dim = frames.dimension;
  SampleBatch batch;
  std::vector<std::vector<int>> valid_pixels(static_cast<std::size_t>(nf));
  std::vector<Vec> endpoints;
  for (int k = 0; k < nf; ++k) {
    const Frame& f = frames.frames[static_cast<std::size_t>(eligible[static_cast<std::size_t>(k)])];
    for (int px = 0; px < f.pixel_count(); ++px) {
      if (!f.valid(px)) continue;
      valid_pixels[static_cast<std::size_t>(k)].push_back(px);
      endpoints.push_back(f.pose.position + f.depth[static_cast<std::size_t>(px)] * f.ray_direction(px));
      batch.surface_labels.push_back(f.labels[static_cast<std::size_t>(px)]);
    }
  }
  batch.surface_points.resize(static_cast<Eigen::Index>(endpoints.size()), dim);
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    batch.surface_points.row(static_cast<Eigen::Index>(i)) = endpoints[i].transpose();
  }

  const int n = config.batch_size;
  const int spr = config.samples_per_ray;
  const int front = std::clamp(static_cast<int>(std::lround((1.0 - config.behind_fraction) * spr)), 1, spr);
  const int behind = spr - front;
  const int near = std::min(front - 1, static_cast<int>(std::lround(config.near_fraction * front)));
  const int far = front - near;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  batch.query_points.resize(n, dim);
  batch.sdf_targets.resize(n);
  batch.nn_index.assign(static_cast<std::size_t>(n), 0);
  std::vector<bool> in_front(static_cast<std::size_t>(n));
  int filled = 0;
  for (int ray = 0; filled < n; ++ray) {
    const auto k = static_cast<std::size_t>(ray % nf);
    const Frame& f = frames.frames[static_cast<std::size_t>(eligible[k])];
    std::uniform_int_distribution<std::size_t> pick(0, valid_pixels[k].size() - 1);
    const int px = valid_pixels[k][pick(rng)];
    const double depth = f.depth[static_cast<std::size_t>(px)];
    const Vec dir = f.ray_direction(px);
    for (int s = 0; s < spr && filled < n; ++s, ++filled) {
      double t;
      if (s < far) {
        t = depth * (s + unit(rng)) / far;
      } else if (s < front) {
        const double band = std::min(config.near_depth, depth);
        t = depth - band + band * (s - far + unit(rng)) / near;
      } else {
        t = depth + config.behind_depth * (s - front + unit(rng)) / behind;
      }
      batch.query_points.row(filled) = (f.pose.position + t * dir).transpose();
      in_front[static_cast<std::size_t>(filled)] = t < depth;
    }
  }

  const auto m = batch.surface_points.rows();
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d2 = (batch.surface_points.row(j) - batch.query_points.row(i)).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(j);
      }
    }
    const double d = std::sqrt(best);
    batch.sdf_targets[i] = in_front[static_cast<std::size_t>(i)] ? d : -d;
    batch.nn_index[static_cast<std::size_t>(i)] = arg;
  }

  batch.target_embeddings.resize(n, table.dim());
  for (int i = 0; i < n; ++i) {
    const int label = batch.surface_labels[static_cast<std::size_t>(batch.nn_index[static_cast<std::size_t>(i)])];
    if (label < 0 || label >= static_cast<int>(frames.vocabulary.size())) {
      throw std::runtime_error("sample_batch: pixel label outside the vocabulary");
    }
    batch.target_embeddings.row(i) = table.at(frames.vocabulary[static_cast<std::size_t>(label)]).transpose();
  }
  return batch;
}

ag::Tensor loss_affordance(const ag::Tensor& r, const ag::Tensor& delta) { return ag::mse(r, delta); }

Eigen::VectorXd semantic_weights(const Eigen::VectorXd& delta, double tau, bool invert_sign) {
  if (delta.size() == 0) throw std::invalid_argument("semantic_weights: empty batch");
  if (!(tau > 0.0)) throw std::invalid_argument("semantic_weights: temperature must be positive");
  const Eigen::ArrayXd z = (invert_sign ? 1.0 : -1.0) * delta.array() / tau;
  const Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

ag::Tensor loss_semantic(const ag::Tensor& pred, const ag::Tensor& target, const Eigen::VectorXd& delta,
                         double weight_temperature, double logit_temperature, bool invert_sign) {
  const auto n = pred.rows();
  if (n < 2) throw std::invalid_argument("loss_semantic: need at least two samples");
  if (target.rows() != n || target.cols() != pred.cols() || delta.size() != n) {
    throw std::invalid_argument("loss_semantic: shape mismatch");
  }
  // Targets repeat heavily (one vector per label), and columns of the N x N
  // logit matrix with equal targets are equal. Working on the K distinct
  // targets gives the same loss: a row's log-sum-exp over N columns is the
  // log-sum-exp over K classes offset by log(multiplicity), and every column
  // of one class shares its log-sum-exp over rows.
  const ag::Matrix& t = target.value();
  std::vector<Eigen::Index> reps;
  std::vector<int> cls(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    while (c < reps.size() && t.row(reps[c]) != t.row(i)) ++c;
    if (c == reps.size()) reps.push_back(i);
    cls[static_cast<std::size_t>(i)] = static_cast<int>(c);
  }
  const auto k = static_cast<Eigen::Index>(reps.size());
  ag::Matrix unique(k, t.cols());
  ag::Matrix log_count = ag::Matrix::Zero(1, k);
  ag::Matrix onehot = ag::Matrix::Zero(n, k);
  for (Eigen::Index c = 0; c < k; ++c) unique.row(c) = t.row(reps[static_cast<std::size_t>(c)]);
  for (Eigen::Index i = 0; i < n; ++i) {
    onehot(i, cls[static_cast<std::size_t>(i)]) = 1.0;
    log_count(0, cls[static_cast<std::size_t>(i)]) += 1.0;
  }
  log_count = log_count.array().log().matrix();

  const ag::Tensor logits =
      ag::scale(ag::matmul(pred, ag::transpose(ag::Tensor::constant(std::move(unique)))), 1.0 / logit_temperature);
  const ag::Tensor mask = ag::Tensor::constant(onehot);
  const ag::Tensor own = ag::dot(logits, mask);
  const ag::Tensor rows = ag::sub(ag::logsumexp(ag::add(logits, ag::Tensor::constant(log_count))), own);
  const ag::Tensor cols = ag::sub(ag::matmul(mask, ag::logsumexp(ag::transpose(logits))), own);
  const ag::Tensor w = ag::Tensor::constant(semantic_weights(delta, weight_temperature, invert_sign) * 0.5);
  return ag::sum(ag::mul(ag::add(rows, cols), w));
}

LossTerms loss_total(const SampleBatch& batch, const FieldModel& model, const TrainConfig& config) {
  const FieldOutput out = model.train_forward(ag::Tensor::constant(batch.query_points));
  const ag::Tensor delta = ag::Tensor::constant(batch.sdf_targets);
  LossTerms terms;
  const ag::Tensor lr = loss_affordance(out.sdf, delta);
  terms.affordance = lr.item();
  terms.total = ag::scale(lr, config.lambda_r);
  if (config.lambda_s > 0.0) {
    const ag::Tensor ls = loss_semantic(out.sem, ag::Tensor::constant(batch.target_embeddings), batch.sdf_targets,
                                        config.weight_temperature, config.logit_temperature,
                                        config.invert_weight_sign);
    terms.semantic = ls.item();
    terms.total = ag::add(terms.total, ag::scale(ls, config.lambda_s));
  }
  return terms;
}

TrainResult train(const FrameDataset& frames, const EmbeddingTable& table, const FieldConfig& field_config,
                  const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (frames.frames.empty()) throw std::invalid_argument("train: no frames");
  if (field_config.sem_dim != table.dim()) {
    throw std::invalid_argument("train: semantic head width differs from the embedding dimension");
  }
  if (field_config.input_dim != frames.dimension) throw std::invalid_argument("train: dimension mismatch");
  for (const auto& label : frames.vocabulary) {
    if (!table.contains(label)) throw std::invalid_argument("train: no embedding for label '" + label + "'");
  }

  TrainResult result{FieldModel(field_config), {}};
  auto& params = result.model.parameters();
  ag::AdamState adam = ag::make_adam_state(params, ag::AdamOptions{.lr = config.lr});
  Rng rng(config.seed);
  result.log.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 1; step <= config.steps; ++step) {
    const SampleBatch batch = sample_batch(frames, table, config, rng);
    LossTerms terms = loss_total(batch, result.model, config);
    const double total = terms.total.item();
    if (!std::isfinite(total)) {
      throw std::runtime_error("train: loss became non-finite at step " + std::to_string(step));
    }
    ag::zero_grad(params);
    ag::backward(terms.total);
    try {
      ag::adam_step(params, adam);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train: step " + std::to_string(step) + ": " + e.what());
    }
    result.log.push_back({step, terms.affordance, terms.semantic, total});
    if (on_step) on_step(step, result.model, result.log.back());
  }
  return result;
}

void write_log_line(std::ostream& out, const TrainLogEntry& e) {
  out << "step=" << e.step << " affordance=" << e.affordance << " semantic=" << e.semantic
      << " total=" << e.total << '\n';
}

}  // namespace semnav

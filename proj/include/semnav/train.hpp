// Joint supervision of the field from posed depth+label frames.
#pragma once

#include "semnav/capture.hpp"
#include "semnav/embedding.hpp"
#include "semnav/field.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace semnav {

struct TrainConfig {
  int batch_size = 1024;       // Query points per step.
  int frames_per_batch = 8;
  int steps = 4000;
  double lr = 3e-4;
  double lambda_r = 1.0;
  double lambda_s = 1.0;
  int samples_per_ray = 16;
  double behind_fraction = 0.2;  // Share of each ray's samples placed past the hit.
  double behind_depth = 0.3;     // How far past the hit those samples reach (m).
  double near_fraction = 0.5;    // Share of the in-front samples drawn close to the hit.
  double near_depth = 0.5;       // Width of that band in front of the hit (m).
  double weight_temperature = 0.5;  // tau_w of the distance weighting (m).
  double logit_temperature = 0.1;   // Scales the similarity logits by 1/T.
  bool invert_weight_sign = false;  // Use softmax(+delta/tau_w) instead.
  int log_every = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SampleBatch {
  ag::Matrix query_points;        // N x D
  Eigen::VectorXd sdf_targets;    // N
  ag::Matrix target_embeddings;   // N x E, unit rows
  std::vector<int> nn_index;      // N, rows of surface_points
  ag::Matrix surface_points;      // M x D, every valid endpoint of the sampled frames
  std::vector<int> surface_labels;  // M
};

// Draws frames_per_batch frames, then rays through random valid pixels of
// those frames and stratified samples along each ray. Targets are signed
// distances to the nearest endpoint among all valid pixels of the drawn
// frames: positive in front of the measured depth, negative behind it.
// Frames without valid pixels are skipped; throws if nothing remains.
SampleBatch sample_batch(const FrameDataset& frames, const EmbeddingTable& table, const TrainConfig& config,
                         Rng& rng);

// mean((r - delta)^2)
ag::Tensor loss_affordance(const ag::Tensor& r, const ag::Tensor& delta);

// Per-sample weights softmax(-delta / tau) (or +delta when inverted).
Eigen::VectorXd semantic_weights(const Eigen::VectorXd& delta, double tau, bool invert_sign = false);

// Symmetric InfoNCE over logits pred * target^T / logit_temperature; each
// sample's row and column cross-entropy terms are averaged and weighted by
// semantic_weights(delta). Targets are treated as constants. Throws for
// batches smaller than 2.
ag::Tensor loss_semantic(const ag::Tensor& pred, const ag::Tensor& target, const Eigen::VectorXd& delta,
                         double weight_temperature, double logit_temperature = 0.1, bool invert_sign = false);

struct LossTerms {
  ag::Tensor total;
  double affordance = 0.0;
  double semantic = 0.0;
};

LossTerms loss_total(const SampleBatch& batch, const FieldModel& model, const TrainConfig& config);

struct TrainLogEntry {
  int step = 0;
  double affordance = 0.0;
  double semantic = 0.0;
  double total = 0.0;
};

struct TrainResult {
  FieldModel model;
  std::vector<TrainLogEntry> log;  // Every step.
};

// Called after each optimizer step with the 1-based step number.
using StepCallback = std::function<void(int step, const FieldModel& model, const TrainLogEntry& entry)>;

// Sample, loss, backward, Adam step; repeated config.steps times. Throws
// std::runtime_error naming the step if the loss stops being finite.
TrainResult train(const FrameDataset& frames, const EmbeddingTable& table, const FieldConfig& field_config,
                  const TrainConfig& config, const StepCallback& on_step = {});

// "step=<n> affordance=<x> semantic=<x> total=<x>"
void write_log_line(std::ostream& out, const TrainLogEntry& entry);

}  // namespace semnav

// The unified coordinate network: Fourier-feature encoding, a shared ReLU
// trunk, and two linear heads producing a signed distance and a semantic
// embedding for any point in space.
#pragma once

#include "semnav/autograd.hpp"
#include "semnav/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace semnav {

struct FieldOutput {
  ag::Tensor sdf;  // N x 1
  ag::Tensor sem;  // N x E, unit rows
};

// Anything the planners can query: a trained model, or an analytic/mock
// field in tests. `evaluate` must be differentiable with respect to the
// points and must not accumulate gradients into shared state, so one field
// may be evaluated from several threads.
class SpatialField {
 public:
  virtual ~SpatialField() = default;
  virtual int input_dim() const = 0;
  virtual int embedding_dim() const = 0;
  virtual FieldOutput evaluate(const ag::Tensor& points) const = 0;
};

struct QueryResult {
  double sdf = 0.0;
  Eigen::VectorXd sem;
};

struct BatchQueryResult {
  Eigen::VectorXd sdf;
  ag::Matrix sem;
};

QueryResult query(const SpatialField& field, const Vec& p);
BatchQueryResult query_batch(const SpatialField& field, const ag::Matrix& points);

struct FieldConfig {
  int input_dim = 2;
  int fourier_bands = 4;
  int layers = 3;
  int width = 128;
  int sem_dim = 64;
  std::uint64_t seed = 1;
  Bounds bounds;  // Inputs are normalized to [-1, 1] over these bounds.

  void validate() const;
  std::size_t encoded_dim() const { return static_cast<std::size_t>(input_dim * (1 + 2 * fourier_bands)); }
  bool operator==(const FieldConfig& other) const;
};

FieldConfig default_field_config(const Scene& scene, std::uint64_t seed = 1);

// Fourier-feature encoding of a batch of points (N x D -> N x D(1+2B)):
// [p_n, sin(2^k pi p_n), cos(2^k pi p_n)] for k = 0..B-1, where p_n is p
// mapped to [-1, 1] over `bounds`. Differentiable with respect to points.
ag::Tensor encode(const ag::Tensor& points, const Bounds& bounds, int fourier_bands);

class FieldModel : public SpatialField {
 public:
  FieldModel() = default;
  explicit FieldModel(FieldConfig config);

  const FieldConfig& config() const { return config_; }
  int input_dim() const override { return config_.input_dim; }
  int embedding_dim() const override { return config_.sem_dim; }

  // Constant offset added to every SDF query; never applied during training.
  double sdf_bias_correction() const { return sdf_bias_correction_; }
  void set_sdf_bias_correction(double meters);

  std::vector<ag::NamedParameter>& parameters() { return params_; }
  const std::vector<ag::NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Forward pass through the tracked parameters (raw SDF, no correction).
  FieldOutput train_forward(const ag::Tensor& points) const;
  // Forward pass through constant copies of the parameters, with correction.
  FieldOutput evaluate(const ag::Tensor& points) const override;

  void save(const std::filesystem::path& path) const;
  static FieldModel load(const std::filesystem::path& path);
  // Throws if the stored configuration differs from `expected`.
  static FieldModel load(const std::filesystem::path& path, const FieldConfig& expected);

 private:
  FieldOutput forward(const ag::Tensor& points, const std::vector<ag::Tensor>& weights) const;
  void check_finite() const;

  FieldConfig config_;
  std::vector<ag::NamedParameter> params_;
  double sdf_bias_correction_ = 0.0;
};

}  // namespace semnav

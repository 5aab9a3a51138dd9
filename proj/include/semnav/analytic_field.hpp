// The ground-truth scene as a SpatialField: exact SDF plus a soft semantic
// field blending label embeddings by proximity. Gradients with respect to
// the query points are central differences.
#pragma once

#include "semnav/embedding.hpp"
#include "semnav/field.hpp"

namespace semnav {

class AnalyticField : public SpatialField {
 public:
  // sem(p) = normalize(sum_l exp(-max(label_sdf_l(p), 0) / temperature) e_l)
  // over the scene labels; every label needs an entry in `table`.
  AnalyticField(Scene scene, EmbeddingTable table, double temperature = 0.25);

  int input_dim() const override { return scene_.dimension; }
  int embedding_dim() const override { return table_.dim(); }
  FieldOutput evaluate(const ag::Tensor& points) const override;

  const Scene& scene() const { return scene_; }

 private:
  Eigen::VectorXd semantic(const Vec& p) const;

  Scene scene_;
  EmbeddingTable table_;
  std::vector<std::string> labels_;
  double temperature_;
};

}  // namespace semnav

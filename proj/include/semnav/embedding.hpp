// Unit-norm semantic embeddings for labels and queries.
//
// Vectors are either synthesized deterministically from a label string or
// imported from a precomputed table (e.g. text embeddings computed offline).
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace semnav {

enum class EmbeddingProvenance { Synthetic, Imported };

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dim, EmbeddingProvenance provenance);

  int dim() const { return dim_; }
  EmbeddingProvenance provenance() const { return provenance_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& label) const { return entries_.count(label) != 0; }

  // Normalizes `v` unless it is already unit length to within 1e-12.
  void insert(const std::string& label, const Eigen::VectorXd& v);
  const Eigen::VectorXd& at(const std::string& label) const;
  const std::map<std::string, Eigen::VectorXd>& entries() const { return entries_; }

 private:
  int dim_ = 0;
  EmbeddingProvenance provenance_ = EmbeddingProvenance::Synthetic;
  std::map<std::string, Eigen::VectorXd> entries_;
};

struct QueryEmbedding {
  std::string text;
  Eigen::VectorXd vector;
};

inline constexpr int kDefaultEmbeddingDim = 64;

// Deterministic in (label, dim, seed): the label hash seeds a Gaussian
// stream whose first `dim` draws are normalized. Throws if dim < 8.
Eigen::VectorXd synth_embedding(const std::string& label, int dim, std::uint64_t seed);
EmbeddingTable synth_table(std::span<const std::string> labels, int dim, std::uint64_t seed);

// Text format: a `dim=<N>` header, then `label<TAB>v1,...,vN` per line.
EmbeddingTable load_table(const std::filesystem::path& path);
void save_table(const EmbeddingTable& table, const std::filesystem::path& path);

// Dot product; cosine similarity for unit vectors. Throws on dim mismatch.
double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Query vectors are label vectors: queries are restricted to the vocabulary.
QueryEmbedding make_query(const EmbeddingTable& table, const std::string& text);

}  // namespace semnav

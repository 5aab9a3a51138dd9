#include "semnav/embedding.hpp"
#include "support.hpp"

#include <filesystem>
#include <fstream>

using namespace semnav;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("synthetic embeddings are deterministic unit vectors") {
  const Eigen::VectorXd a = synth_embedding("refrigerator", 64, 1);
  const Eigen::VectorXd b = synth_embedding("refrigerator", 64, 1);
  CHECK(a == b);
  CHECK(a.size() == 64);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(synth_embedding("refrigerator", 64, 2) != a);
  CHECK_THROWS(synth_embedding("refrigerator", 7, 1));
  CHECK_THROWS(synth_embedding("", 64, 1));
}

TEST_CASE("distinct labels are nearly orthogonal at dim 64") {
  double total = 0.0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double c = std::abs(similarity(synth_embedding("label" + std::to_string(2 * i), 64, 7),
                                         synth_embedding("label" + std::to_string(2 * i + 1), 64, 7)));
    total += c;
    worst = std::max(worst, c);
  }
  CHECK(total / 1000 < 0.15);
  CHECK(worst < 0.5);
}

TEST_CASE("similarity is a dot product") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(33), b(33);
    for (int i = 0; i < 33; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    double naive = 0.0;
    for (int i = 0; i < 33; ++i) naive += a[i] * b[i];
    CHECK(std::abs(similarity(a, b) - naive) < 1e-12);
    CHECK(similarity(a, b) == similarity(b, a));
    CHECK(std::abs(similarity(a, b)) <= a.norm() * b.norm() + 1e-12);
  }
  const Eigen::VectorXd e0 = Eigen::VectorXd::Unit(8, 0);
  const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(8, 1);
  CHECK(similarity(e0, e0) == 1.0);
  CHECK(similarity(e0, e1) == 0.0);
  CHECK_THROWS(similarity(e0, Eigen::VectorXd::Unit(9, 0)));
}

TEST_CASE("table files: import, errors, bitwise round trip") {
  std::string text = "dim=512\n";
  for (const char* label : {"chair", "lamp", "sink"}) {
    text += label;
    text += '\t';
    for (int i = 0; i < 512; ++i) text += (i ? "," : "") + std::to_string(0.5 + i % 7);
    text += '\n';
  }
  const EmbeddingTable t = load_table(write_file("semnav_table_512.tsv", text));
  CHECK(t.dim() == 512);
  CHECK(t.size() == 3);
  CHECK(t.provenance() == EmbeddingProvenance::Imported);
  CHECK(t.at("lamp").norm() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(load_table(write_file("semnav_table_zero.tsv", "dim=8\nzero\t0,0,0,0,0,0,0,0\n")));
  CHECK_THROWS(load_table(write_file("semnav_table_mismatch.tsv", "dim=8\na\t1,2,3,4,5,6,7,8\nb\t1,2,3\n")));
  CHECK_THROWS(load_table(write_file("semnav_table_dup.tsv", "dim=8\na\t1,2,3,4,5,6,7,8\na\t1,2,3,4,5,6,7,9\n")));
  CHECK_THROWS(load_table(write_file("semnav_table_nohdr.tsv", "a\t1,2,3,4,5,6,7,8\n")));

  const std::vector<std::string> labels{"bed", "coat rack", "table"};
  const EmbeddingTable synth = synth_table(labels, 64, 3);
  const auto path = std::filesystem::temp_directory_path() / "semnav_table_rt.tsv";
  save_table(synth, path);
  const EmbeddingTable back = load_table(path);
  for (const auto& l : labels) CHECK(back.at(l) == synth.at(l));
}

TEST_CASE("queries are restricted to the vocabulary") {
  const std::vector<std::string> labels{"bed", "table"};
  const EmbeddingTable t = synth_table(labels, 16, 1);
  const QueryEmbedding q = make_query(t, "table");
  CHECK(q.vector == t.at("table"));
  CHECK(q.text == "table");
  CHECK_THROWS(make_query(t, "sofa"));
}

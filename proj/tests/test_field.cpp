#include "gradcheck.hpp"
#include "semnav/field.hpp"
#include "support.hpp"

#include <filesystem>
#include <numbers>

using namespace semnav;
using ag::Matrix;
using ag::Tensor;
using testing::v2;

namespace {

Bounds unit_bounds() {
  Bounds b;
  b.lo = v2(-1, 2);
  b.hi = v2(3, 4);
  return b;
}

Matrix random_points(const Bounds& b, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(n, b.lo.size());
  for (int i = 0; i < n; ++i) m.row(i) = testing::uniform_point(b, rng).transpose();
  return m;
}

FieldModel small_model(std::uint64_t seed = 1) {
  FieldConfig fc = default_field_config(bundled_scene("single_disk"), seed);
  fc.width = 32;
  return FieldModel(fc);
}

}  // namespace

TEST_CASE("encoding layout and normalisation") {
  const Bounds b = unit_bounds();
  const Tensor p = Tensor::constant((Matrix(2, 2) << -1, 2, 1, 3.5).finished());
  const Tensor e0 = encode(p, b, 0);
  CHECK(e0.cols() == 2);
  CHECK(e0.value()(0, 0) == doctest::Approx(-1.0));
  CHECK(e0.value()(0, 1) == doctest::Approx(-1.0));
  CHECK(e0.value()(1, 0) == doctest::Approx(0.0));
  CHECK(e0.value()(1, 1) == doctest::Approx(0.5));
  for (int bands : {1, 3, 6}) CHECK(encode(p, b, bands).cols() == 2 * (1 + 2 * bands));
  const Tensor e2 = encode(p, b, 2);
  const double x = 0.5;  // normalized y of the second point
  bool found_sin = false;
  for (Eigen::Index j = 0; j < e2.cols(); ++j) {
    if (std::abs(e2.value()(1, j) - std::sin(2 * std::numbers::pi * x)) < 1e-12) found_sin = true;
  }
  CHECK(found_sin);
}

TEST_CASE("encoding is continuous with bounded slope") {
  const Bounds b = unit_bounds();
  const int bands = 4;
  const Matrix base = random_points(b, 50, 3);
  const double scale = 2.0 / 2.0;  // normalisation factor: 2 / min extent
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    Matrix moved = base;
    moved.array() += delta;
    const Matrix d = encode(Tensor::constant(moved), b, bands).value() - encode(Tensor::constant(base), b, bands).value();
    const double bound = std::sqrt(2.0) * delta * scale * std::pow(2.0, bands) * std::numbers::pi;
    for (Eigen::Index i = 0; i < d.rows(); ++i) CHECK(d.row(i).norm() <= bound * std::sqrt(1 + 2 * bands));
  }
}

TEST_CASE("fresh model gives finite outputs and unit semantics") {
  const FieldModel m = small_model();
  const Matrix pts = random_points(m.config().bounds, 1000, 4);
  const BatchQueryResult q = query_batch(m, pts);
  CHECK(q.sdf.allFinite());
  CHECK(q.sem.allFinite());
  for (Eigen::Index i = 0; i < q.sem.rows(); ++i) CHECK(std::abs(q.sem.row(i).norm() - 1.0) < 1e-6);
}

TEST_CASE("batched queries agree with single queries") {
  const FieldModel m = small_model(2);
  const Matrix pts = random_points(m.config().bounds, 512, 5);
  const BatchQueryResult batch = query_batch(m, pts);
  for (int i = 0; i < 512; ++i) {
    const QueryResult one = query(m, pts.row(i).transpose());
    CHECK(std::abs(one.sdf - batch.sdf[i]) < 1e-12);
    CHECK((one.sem.transpose() - batch.sem.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const BatchQueryResult single = query_batch(m, pts.topRows(1));
  const QueryResult first = query(m, pts.row(0).transpose());
  CHECK(single.sdf[0] == first.sdf);

  Matrix rev = pts.colwise().reverse();
  const BatchQueryResult back = query_batch(m, rev);
  for (int i = 0; i < 512; ++i) CHECK(std::abs(back.sdf[511 - i] - batch.sdf[i]) < 1e-12);
}

TEST_CASE("bias correction is an exact additive shift") {
  FieldModel m = small_model(3);
  const Matrix pts = random_points(m.config().bounds, 64, 6);
  const Eigen::VectorXd raw = query_batch(m, pts).sdf;
  m.set_sdf_bias_correction(0.125);
  const Eigen::VectorXd shifted = query_batch(m, pts).sdf;
  for (int i = 0; i < 64; ++i) CHECK(shifted[i] == raw[i] + 0.125);
  CHECK_THROWS(m.set_sdf_bias_correction(-0.1));
  const FieldOutput tr = m.train_forward(Tensor::constant(pts));
  for (int i = 0; i < 64; ++i) CHECK(tr.sdf.value()(i, 0) == doctest::Approx(raw[i]).epsilon(1e-14));
}

TEST_CASE("checkpoints round-trip bitwise and reject damage") {
  FieldModel m = small_model(4);
  m.set_sdf_bias_correction(0.05);
  const auto path = std::filesystem::temp_directory_path() / "semnav_field_test.ckpt";
  m.save(path);
  const FieldModel back = FieldModel::load(path, m.config());
  CHECK(back.sdf_bias_correction() == m.sdf_bias_correction());
  const Matrix pts = random_points(m.config().bounds, 100, 7);
  const BatchQueryResult a = query_batch(m, pts);
  const BatchQueryResult b = query_batch(back, pts);
  CHECK(a.sdf == b.sdf);
  CHECK(a.sem == b.sem);

  FieldConfig other = m.config();
  other.width = 48;
  CHECK_THROWS(FieldModel::load(path, other));

  const auto size = std::filesystem::file_size(path);
  MESSAGE("checkpoint bytes (width 32): " << size);
  CHECK(size > 8 * m.parameter_count());
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS(FieldModel::load(path));

  const FieldModel full(default_field_config(bundled_scene("rooms")));
  full.save(path);
  const auto full_size = std::filesystem::file_size(path);
  MESSAGE("checkpoint bytes (default config): " << full_size);
  CHECK(full_size > 10'000);
  CHECK(full_size < 5'000'000);
}

TEST_CASE("config validation") {
  FieldConfig fc = default_field_config(bundled_scene("rooms"));
  CHECK_NOTHROW(fc.validate());
  fc.layers = 0;
  CHECK_THROWS(fc.validate());
  fc = default_field_config(bundled_scene("rooms"));
  fc.width = 8;
  CHECK_THROWS(fc.validate());
  fc = default_field_config(bundled_scene("rooms"));
  fc.fourier_bands = -1;
  CHECK_THROWS(fc.validate());
  CHECK(default_field_config(bundled_scene("rooms")).width == 128);
  CHECK(default_field_config(bundled_scene("rooms")).fourier_bands == 4);
  CHECK(default_field_config(bundled_scene("rooms")).layers == 3);
}

TEST_CASE("field outputs are differentiable in the query point") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) CHECK(gradcheck::input_gradient_check(seed).max_rel < 1e-3);
}

#include "semnav/field.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace semnav {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_config(std::ostream& out, const FieldConfig& c) {
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_dim));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.fourier_bands));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.layers));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.width));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.sem_dim));
  io::put<std::uint64_t>(out, c.seed);
  for (int i = 0; i < c.input_dim; ++i) io::put<double>(out, c.bounds.lo[i]);
  for (int i = 0; i < c.input_dim; ++i) io::put<double>(out, c.bounds.hi[i]);
}

FieldConfig read_config(std::istream& in) {
  FieldConfig c;
  c.input_dim = static_cast<int>(io::get<std::uint32_t>(in));
  c.fourier_bands = static_cast<int>(io::get<std::uint32_t>(in));
  c.layers = static_cast<int>(io::get<std::uint32_t>(in));
  c.width = static_cast<int>(io::get<std::uint32_t>(in));
  c.sem_dim = static_cast<int>(io::get<std::uint32_t>(in));
  c.seed = io::get<std::uint64_t>(in);
  if (c.input_dim != 2 && c.input_dim != 3) throw std::runtime_error("checkpoint: bad input dimension");
  c.bounds.lo = Vec(c.input_dim);
  c.bounds.hi = Vec(c.input_dim);
  for (int i = 0; i < c.input_dim; ++i) c.bounds.lo[i] = io::get<double>(in);
  for (int i = 0; i < c.input_dim; ++i) c.bounds.hi[i] = io::get<double>(in);
  return c;
}

}  // namespace

QueryResult query(const SpatialField& field, const Vec& p) {
  ag::Matrix m(1, p.size());
  m.row(0) = p.transpose();
  const auto out = field.evaluate(ag::Tensor::constant(std::move(m)));
  return QueryResult{out.sdf.value()(0, 0), out.sem.value().row(0).transpose()};
}

BatchQueryResult query_batch(const SpatialField& field, const ag::Matrix& points) {
  const auto out = field.evaluate(ag::Tensor::constant(points));
  return BatchQueryResult{out.sdf.value().col(0), out.sem.value()};
}

void FieldConfig::validate() const {
  if (input_dim != 2 && input_dim != 3) throw std::invalid_argument("field: input_dim must be 2 or 3");
  if (layers < 1) throw std::invalid_argument("field: need at least one trunk layer");
  if (width < 16) throw std::invalid_argument("field: trunk width must be at least 16");
  if (fourier_bands < 0) throw std::invalid_argument("field: fourier_bands must be non-negative");
  if (sem_dim < 8) throw std::invalid_argument("field: semantic dimension must be at least 8");
  if (bounds.lo.size() != input_dim || bounds.hi.size() != input_dim) {
    throw std::invalid_argument("field: bounds must match input_dim");
  }
  if (!((bounds.hi - bounds.lo).array() > 0.0).all()) throw std::invalid_argument("field: degenerate bounds");
}

bool FieldConfig::operator==(const FieldConfig& o) const {
  return input_dim == o.input_dim && fourier_bands == o.fourier_bands && layers == o.layers &&
         width == o.width && sem_dim == o.sem_dim && seed == o.seed && bounds.lo == o.bounds.lo &&
         bounds.hi == o.bounds.hi;
}

FieldConfig default_field_config(const Scene& scene, std::uint64_t seed) {
  FieldConfig c;
  c.input_dim = scene.dimension;
  c.seed = seed;
  c.bounds = scene.bounds;
  return c;
}

ag::Tensor encode(const ag::Tensor& points, const Bounds& bounds, int fourier_bands) {
  const auto d = points.cols();
  if (bounds.lo.size() != d) throw std::invalid_argument("encode: bounds dimension mismatch");
  ag::Matrix offset(1, d);
  ag::Matrix factor(1, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    offset(0, i) = bounds.lo[i];
    factor(0, i) = 2.0 / (bounds.hi[i] - bounds.lo[i]);
  }
  const ag::Tensor pn = ag::add_scalar(
      ag::mul(ag::sub(points, ag::Tensor::constant(offset)), ag::Tensor::constant(factor)), -1.0);
  std::vector<ag::Tensor> parts{pn};
  for (int k = 0; k < fourier_bands; ++k) {
    const ag::Tensor arg = ag::scale(pn, std::ldexp(std::numbers::pi, k));
    parts.push_back(ag::sin(arg));
    parts.push_back(ag::cos(arg));
  }
  return parts.size() == 1 ? pn : ag::concat_cols(parts);
}

FieldModel::FieldModel(FieldConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  auto linear = [&](const std::string& name, int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    ag::Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    ag::Matrix b(1, out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    params_.push_back({name + ".weight", ag::Tensor::parameter(std::move(w))});
    params_.push_back({name + ".bias", ag::Tensor::parameter(std::move(b))});
  };
  int in = static_cast<int>(config_.encoded_dim());
  for (int l = 0; l < config_.layers; ++l) {
    linear("trunk." + std::to_string(l), in, config_.width);
    in = config_.width;
  }
  linear("sdf_head", config_.width, 1);
  linear("sem_head", config_.width, config_.sem_dim);
}

void FieldModel::set_sdf_bias_correction(double meters) {
  if (!(meters >= 0.0) || !std::isfinite(meters)) {
    throw std::invalid_argument("sdf bias correction must be a finite non-negative distance");
  }
  sdf_bias_correction_ = meters;
}

std::size_t FieldModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.value().size());
  return n;
}

FieldOutput FieldModel::forward(const ag::Tensor& points, const std::vector<ag::Tensor>& w) const {
  if (points.cols() != config_.input_dim) throw std::invalid_argument("field: point dimension mismatch");
  ag::Tensor h = encode(points, config_.bounds, config_.fourier_bands);
  std::size_t k = 0;
  for (int l = 0; l < config_.layers; ++l, k += 2) h = ag::relu(ag::add(ag::matmul(h, w[k]), w[k + 1]));
  ag::Tensor sdf = ag::add(ag::matmul(h, w[k]), w[k + 1]);
  ag::Tensor sem = ag::add(ag::matmul(h, w[k + 2]), w[k + 3]);
  return FieldOutput{std::move(sdf), ag::normalize_rows(sem)};
}

FieldOutput FieldModel::train_forward(const ag::Tensor& points) const {
  std::vector<ag::Tensor> w;
  w.reserve(params_.size());
  for (const auto& p : params_) w.push_back(p.tensor);
  return forward(points, w);
}

FieldOutput FieldModel::evaluate(const ag::Tensor& points) const {
  check_finite();
  std::vector<ag::Tensor> w;
  w.reserve(params_.size());
  for (const auto& p : params_) w.push_back(ag::Tensor::constant(p.tensor.value()));
  auto out = forward(points, w);
  if (sdf_bias_correction_ != 0.0) out.sdf = ag::add_scalar(out.sdf, sdf_bias_correction_);
  return out;
}

void FieldModel::check_finite() const {
  for (const auto& p : params_) {
    if (!p.tensor.value().allFinite()) throw std::runtime_error("field: parameter '" + p.name + "' is not finite");
  }
}

void FieldModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCheckpointMagic, 4);
  io::put<std::uint32_t>(out, kCheckpointVersion);
  write_config(out, config_);
  io::put<double>(out, sdf_bias_correction_);
  io::put<std::uint64_t>(out, parameter_count());
  for (const auto& p : params_) {
    const auto& v = p.tensor.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) io::put<double>(out, v.data()[i]);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FieldModel FieldModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
    throw std::runtime_error(path.string() + ": not a field checkpoint");
  }
  if (io::get<std::uint32_t>(in) != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  }
  FieldConfig config = read_config(in);
  config.validate();
  const double correction = io::get<double>(in);
  FieldModel model(config);
  if (io::get<std::uint64_t>(in) != model.parameter_count()) {
    throw std::runtime_error(path.string() + ": parameter count does not match the stored configuration");
  }
  for (auto& p : model.params_) {
    auto& v = p.tensor.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = io::get<double>(in);
  }
  model.set_sdf_bias_correction(correction);
  return model;
}

FieldModel FieldModel::load(const std::filesystem::path& path, const FieldConfig& expected) {
  FieldModel model = load(path);
  if (!(model.config() == expected)) throw std::runtime_error(path.string() + ": checkpoint configuration mismatch");
  return model;
}

}  // namespace semnav

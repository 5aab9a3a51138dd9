#include "semnav/capture.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace semnav {

namespace {

constexpr char kFrameMagic[4] = {'S', 'N', 'F', 'D'};
constexpr std::uint32_t kFrameVersion = 1;

}  // namespace

Pose Pose::planar(double x, double y, double yaw) {
  Pose p;
  p.position = Vec(2);
  p.position << x, y;
  p.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  return p;
}

double Pose::yaw() const {
  const Eigen::Matrix3d r = orientation.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

Vec Pose::rotate(const Vec& camera_dir) const {
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < camera_dir.size(); ++i) d[i] = camera_dir[i];
  const Eigen::Vector3d w = orientation * d;
  return w.head(camera_dir.size());
}

double Intrinsics::focal() const { return 0.5 * width / std::tan(0.5 * fov); }

Vec camera_direction(const Intrinsics& intrinsics, int dimension, int pixel) {
  const int u = pixel % intrinsics.width;
  const int v = pixel / intrinsics.width;
  const double f = intrinsics.focal();
  Vec d(dimension);
  d[0] = 1.0;
  d[1] = -(u + 0.5 - 0.5 * intrinsics.width) / f;
  if (dimension == 3) d[2] = -(v + 0.5 - 0.5 * intrinsics.height) / f;
  return d.normalized();
}

Vec Frame::ray_direction(int pixel) const {
  return pose.rotate(camera_direction(intrinsics, static_cast<int>(pose.position.size()), pixel));
}

Frame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& intrinsics, const NoiseParams& noise,
                   Rng& rng) {
  if (pose.position.size() != scene.dimension) throw std::invalid_argument("render_frame: pose dimension mismatch");
  if (!(intrinsics.fov > 0.0 && intrinsics.fov < std::numbers::pi)) {
    throw std::invalid_argument("render_frame: field of view must lie in (0, pi)");
  }
  if (intrinsics.width < 1 || intrinsics.height < 1) throw std::invalid_argument("render_frame: empty image");
  if (scene.dimension == 2 && intrinsics.height != 1) {
    throw std::invalid_argument("render_frame: planar scenes use single-row images");
  }
  if (analytic_sdf(scene, pose.position) <= 0.0) {
    throw std::invalid_argument("render_frame: camera position lies inside an obstacle");
  }

  std::vector<int> prim_label(scene.obstacles.size());
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) prim_label[i] = scene.label_id(scene.obstacles[i].label);

  Frame frame;
  frame.intrinsics = intrinsics;
  frame.noise = noise;
  frame.pose = pose;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (noise.sigma_pose > 0.0) {
    for (Eigen::Index i = 0; i < frame.pose.position.size(); ++i) {
      frame.pose.position[i] += noise.sigma_pose * gauss(rng);
    }
  }

  const int n = intrinsics.width * intrinsics.height;
  frame.depth.assign(static_cast<std::size_t>(n), kNoDepth);
  frame.labels.assign(static_cast<std::size_t>(n), kNoLabel);
  for (int px = 0; px < n; ++px) {
    const Vec dir = pose.rotate(camera_direction(intrinsics, scene.dimension, px));
    const auto hit = ray_cast(scene, pose.position, dir, intrinsics.max_range);
    if (!hit) continue;
    double d = hit->distance;
    if (noise.sigma_depth > 0.0) d = std::max(1e-6, d + noise.sigma_depth * gauss(rng));
    frame.depth[static_cast<std::size_t>(px)] = d;
    frame.labels[static_cast<std::size_t>(px)] = prim_label[hit->primitive];
  }
  return frame;
}

std::vector<SurfacePoint> unproject(const Frame& frame, int frame_index) {
  std::vector<SurfacePoint> out;
  for (int px = 0; px < frame.pixel_count(); ++px) {
    if (!frame.valid(px)) continue;
    SurfacePoint sp;
    sp.position = frame.pose.position + frame.depth[static_cast<std::size_t>(px)] * frame.ray_direction(px);
    sp.label_id = frame.labels[static_cast<std::size_t>(px)];
    sp.source_frame = frame_index;
    out.push_back(std::move(sp));
  }
  return out;
}

std::vector<SurfacePoint> unproject_all(const FrameDataset& dataset) {
  std::vector<SurfacePoint> out;
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    auto pts = unproject(dataset.frames[i], static_cast<int>(i));
    out.insert(out.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
  }
  return out;
}

FrameDataset capture_scene(const Scene& scene, const CaptureConfig& config) {
  if (!(config.spacing > 0.0) || config.yaws_per_position < 1) {
    throw std::invalid_argument("capture_scene: spacing and yaw count must be positive");
  }
  Rng rng(config.seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  FrameDataset ds;
  ds.dimension = scene.dimension;
  ds.vocabulary = scene.labels();

  const Vec lo = scene.bounds.lo;
  const Vec hi = scene.bounds.hi;
  const double step = 2.0 * std::numbers::pi / config.yaws_per_position;
  // Lattice centered in the bounds.
  const Vec extent = hi - lo;
  const int nx = static_cast<int>(std::floor(extent[0] / config.spacing)) + 1;
  const int ny = static_cast<int>(std::floor(extent[1] / config.spacing)) + 1;
  const double x0 = lo[0] + 0.5 * (extent[0] - (nx - 1) * config.spacing);
  const double y0 = lo[1] + 0.5 * (extent[1] - (ny - 1) * config.spacing);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      Vec pos(scene.dimension);
      pos[0] = x0 + ix * config.spacing;
      pos[1] = y0 + iy * config.spacing;
      if (scene.dimension == 3) pos[2] = 0.5 * (lo[2] + hi[2]);
      if (analytic_sdf(scene, pos) < config.clearance) continue;
      for (int k = 0; k < config.yaws_per_position; ++k) {
        const double yaw = step * (k + jitter(rng));
        Pose pose;
        pose.position = pos;
        pose.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
        ds.frames.push_back(render_frame(scene, pose, config.intrinsics, config.noise, rng));
      }
    }
  }
  if (ds.frames.empty()) throw std::runtime_error("capture_scene: no free camera positions");
  return ds;
}

void save_frames(const FrameDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kFrameMagic, 4);
  io::put<std::uint32_t>(out, kFrameVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.dimension));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.vocabulary.size()));
  for (const auto& label : dataset.vocabulary) io::put_string(out, label);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.frames.size()));
  for (const auto& f : dataset.frames) {
    if (dataset.dimension == 2) {
      io::put<double>(out, f.pose.position[0]);
      io::put<double>(out, f.pose.position[1]);
      io::put<double>(out, f.pose.yaw());
    } else {
      for (int i = 0; i < 3; ++i) io::put<double>(out, f.pose.position[i]);
      io::put<double>(out, f.pose.orientation.w());
      io::put<double>(out, f.pose.orientation.x());
      io::put<double>(out, f.pose.orientation.y());
      io::put<double>(out, f.pose.orientation.z());
    }
    io::put<double>(out, f.intrinsics.fov);
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.intrinsics.width));
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.intrinsics.height));
    io::put<double>(out, f.intrinsics.max_range);
    io::put<double>(out, f.noise.sigma_depth);
    io::put<double>(out, f.noise.sigma_pose);
    for (double d : f.depth) io::put<double>(out, d);
    for (int l : f.labels) io::put<std::int32_t>(out, l);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FrameDataset load_frames(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kFrameMagic, 4)) {
    throw std::runtime_error(path.string() + ": not a frame dataset");
  }
  if (io::get<std::uint32_t>(in) != kFrameVersion) throw std::runtime_error(path.string() + ": unsupported version");
  FrameDataset ds;
  ds.dimension = static_cast<int>(io::get<std::uint32_t>(in));
  if (ds.dimension != 2 && ds.dimension != 3) throw std::runtime_error(path.string() + ": bad dimension");
  const auto vocab = io::get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < vocab; ++i) ds.vocabulary.push_back(io::get_string(in));
  const auto count = io::get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    Frame f;
    if (ds.dimension == 2) {
      const double x = io::get<double>(in);
      const double y = io::get<double>(in);
      f.pose = Pose::planar(x, y, io::get<double>(in));
    } else {
      f.pose.position = Vec(3);
      for (int i = 0; i < 3; ++i) f.pose.position[i] = io::get<double>(in);
      const double w = io::get<double>(in);
      const double x = io::get<double>(in);
      const double y = io::get<double>(in);
      const double z = io::get<double>(in);
      f.pose.orientation = Eigen::Quaterniond(w, x, y, z);
    }
    f.intrinsics.fov = io::get<double>(in);
    f.intrinsics.width = static_cast<int>(io::get<std::uint32_t>(in));
    f.intrinsics.height = static_cast<int>(io::get<std::uint32_t>(in));
    f.intrinsics.max_range = io::get<double>(in);
    f.noise.sigma_depth = io::get<double>(in);
    f.noise.sigma_pose = io::get<double>(in);
    const auto n = static_cast<std::size_t>(f.intrinsics.width) * static_cast<std::size_t>(f.intrinsics.height);
    if (n == 0 || n > (1u << 26)) throw std::runtime_error(path.string() + ": corrupt image size");
    f.depth.resize(n);
    f.labels.resize(n);
    for (auto& d : f.depth) d = io::get<double>(in);
    for (auto& l : f.labels) l = io::get<std::int32_t>(in);
    ds.frames.push_back(std::move(f));
  }
  return ds;
}

}  // namespace semnav

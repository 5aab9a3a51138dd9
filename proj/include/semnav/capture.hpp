// Posed depth + label frames rendered from a synthetic scene.
#pragma once

#include "semnav/scene.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace semnav {

using Rng = std::mt19937_64;

struct Pose {
  Vec position;
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  static Pose planar(double x, double y, double yaw);
  double yaw() const;
  // Camera-frame direction rotated into the world frame, truncated to the
  // dimension of `position`.
  Vec rotate(const Vec& camera_dir) const;
};

// Pinhole camera looking along its local +x axis. In 2D scenes height is 1
// and the image is a single row of `width` rays. Depth is range along the ray.
struct Intrinsics {
  double fov = 1.5707963267948966;  // Horizontal field of view (radians), < pi.
  int width = 128;
  int height = 1;
  double max_range = 12.0;

  double focal() const;
};

struct NoiseParams {
  double sigma_depth = 0.0;  // Per-pixel depth noise std (m).
  double sigma_pose = 0.0;   // Per-frame position noise std (m), per axis.
  bool zero() const { return sigma_depth == 0.0 && sigma_pose == 0.0; }
};

inline constexpr double kNoDepth = 0.0;
inline constexpr int kNoLabel = -1;

struct Frame {
  Pose pose;  // Recorded pose (includes pose noise when requested).
  Intrinsics intrinsics;
  NoiseParams noise;
  std::vector<double> depth;  // Row-major, kNoDepth where nothing was hit.
  std::vector<int> labels;    // Scene label ids, kNoLabel where nothing was hit.

  int pixel_count() const { return intrinsics.width * intrinsics.height; }
  bool valid(int pixel) const { return depth[static_cast<std::size_t>(pixel)] > 0.0; }
  // Unit ray direction of a pixel in the world frame.
  Vec ray_direction(int pixel) const;
};

struct FrameDataset {
  int dimension = 2;
  std::vector<std::string> vocabulary;
  std::vector<Frame> frames;
};

struct SurfacePoint {
  Vec position;
  int label_id = kNoLabel;
  int source_frame = 0;
};

// Camera-frame unit direction of a pixel.
Vec camera_direction(const Intrinsics& intrinsics, int dimension, int pixel);

// Ray-casts every pixel. Depth noise perturbs hit depths; pose noise
// perturbs the recorded position, so unprojection inherits it. Throws when
// the camera sits inside an obstacle.
Frame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& intrinsics,
                   const NoiseParams& noise, Rng& rng);

std::vector<SurfacePoint> unproject(const Frame& frame, int frame_index = 0);
std::vector<SurfacePoint> unproject_all(const FrameDataset& dataset);

struct CaptureConfig {
  double spacing = 0.5;      // Lattice spacing of camera positions (m).
  int yaws_per_position = 6;
  double clearance = 0.3;    // Minimum analytic SDF at a camera position.
  Intrinsics intrinsics;
  NoiseParams noise;
  std::uint64_t seed = 7;
};

// Renders frames from a lattice of free camera positions with evenly spread,
// jittered headings. Planar scenes only use yaw; 3D scenes look horizontally.
FrameDataset capture_scene(const Scene& scene, const CaptureConfig& config);

// Binary frame dataset (little-endian, layout documented in docs/formats.md).
void save_frames(const FrameDataset& dataset, const std::filesystem::path& path);
FrameDataset load_frames(const std::filesystem::path& path);

}  // namespace semnav

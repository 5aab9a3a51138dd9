// Synthetic scenes built from analytic primitives.
//
// A scene is a set of labeled circles/spheres, axis-aligned boxes and
// capsules inside an axis-aligned bounding region. Its signed distance is
// the minimum over primitives, which is exact outside the union and a valid
// (1-Lipschitz, correctly signed) bound inside overlapping primitives.
#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace semnav {

using Vec = Eigen::VectorXd;

enum class Shape { Sphere, Box, Capsule };

struct Primitive {
  Shape shape = Shape::Sphere;
  Vec center;
  Vec half_extents;  // Box only.
  Vec half_axis;     // Capsule only: the core segment is center +/- half_axis.
  double radius = 0.0;  // Sphere and capsule.
  std::string label;
};

Primitive make_sphere(Vec center, double radius, std::string label);
Primitive make_box(Vec center, Vec half_extents, std::string label);
Primitive make_capsule(Vec center, Vec half_axis, double radius, std::string label);

struct Bounds {
  Vec lo;
  Vec hi;

  Vec extent() const { return hi - lo; }
  bool contains(const Vec& p, double slack = 0.0) const;
};

struct Scene {
  std::string name;
  int dimension = 2;
  Bounds bounds;
  std::vector<Primitive> obstacles;

  // Sorted, de-duplicated label vocabulary; label ids index into it.
  std::vector<std::string> labels() const;
  int label_id(const std::string& label) const;
};

// Throws std::invalid_argument naming the offending primitive index.
void validate(const Scene& scene);

double primitive_sdf(const Primitive& prim, const Vec& p);
double analytic_sdf(const Scene& scene, const Vec& p);
// Signed distance to the primitives carrying `label` only.
double label_sdf(const Scene& scene, const std::string& label, const Vec& p);
// Index of the primitive with the smallest signed distance to p.
std::size_t nearest_primitive(const Scene& scene, const Vec& p);

struct RayHit {
  double distance = 0.0;
  std::size_t primitive = 0;
};

// First intersection along origin + t * direction (direction unit length),
// for 0 < t <= max_range.
std::optional<RayHit> ray_cast(const Scene& scene, const Vec& origin, const Vec& direction,
                               double max_range);

// Scene file I/O (JSON, schema documented in docs/formats.md).
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

// Bundled 2D scenes. All are enclosed by 0.3 m thick walls.
Scene single_disk_scene();
Scene rooms_scene();
Scene clutter_scene();
Scene two_chamber_scene();
// The three-scene evaluation suite: rooms, clutter, two_chamber.
std::vector<Scene> desk_suite();
Scene bundled_scene(const std::string& name);

}  // namespace semnav

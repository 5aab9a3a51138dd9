#include "semnav/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace semnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

double segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Smallest t > eps where the ray enters the sphere.
std::optional<double> ray_sphere(const Vec& o, const Vec& d, const Vec& c, double r) {
  const Vec oc = o - c;
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t > 1e-12) return t;
  return std::nullopt;
}

std::optional<double> ray_box(const Vec& o, const Vec& d, const Vec& c, const Vec& h) {
  double t_near = -kInf;
  double t_far = kInf;
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    const double lo = c[i] - h[i];
    const double hi = c[i] + h[i];
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo || o[i] > hi) return std::nullopt;
      continue;
    }
    double t1 = (lo - o[i]) / d[i];
    double t2 = (hi - o[i]) / d[i];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_near <= 1e-12) return std::nullopt;
  return t_near;
}

std::optional<double> ray_capsule(const Vec& o, const Vec& d, const Primitive& prim) {
  const Vec a = prim.center - prim.half_axis;
  const Vec b = prim.center + prim.half_axis;
  const double len = (b - a).norm();
  std::optional<double> best;
  auto consider = [&best](std::optional<double> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  consider(ray_sphere(o, d, a, prim.radius));
  consider(ray_sphere(o, d, b, prim.radius));
  if (len > 0.0) {
    const Vec u = (b - a) / len;
    const Vec w = o - a;
    const Vec d_perp = d - d.dot(u) * u;
    const Vec w_perp = w - w.dot(u) * u;
    const double qa = d_perp.squaredNorm();
    if (qa > 1e-15) {
      const double qb = w_perp.dot(d_perp);
      const double qc = w_perp.squaredNorm() - prim.radius * prim.radius;
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double t = (-qb - std::sqrt(disc)) / qa;
        const double s = (w + t * d).dot(u);
        if (t > 1e-12 && s >= 0.0 && s <= len) consider(t);
      }
    }
  }
  return best;
}

std::string shape_name(Shape s, int dimension) {
  switch (s) {
    case Shape::Sphere:
      return dimension == 2 ? "circle" : "sphere";
    case Shape::Box:
      return "box";
    case Shape::Capsule:
      return "capsule";
  }
  return "unknown";
}

Vec vec_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json vec_to_json(const Vec& v) {
  auto j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Scene walled_room(std::string name, double width, double height) {
  constexpr double t = 0.3;
  Scene s;
  s.name = std::move(name);
  s.dimension = 2;
  s.bounds.lo = vec2(0.0, 0.0);
  s.bounds.hi = vec2(width, height);
  s.obstacles.push_back(make_box(vec2(width / 2, t / 2), vec2(width / 2, t / 2), "wall"));
  s.obstacles.push_back(make_box(vec2(width / 2, height - t / 2), vec2(width / 2, t / 2), "wall"));
  s.obstacles.push_back(make_box(vec2(t / 2, height / 2), vec2(t / 2, height / 2), "wall"));
  s.obstacles.push_back(make_box(vec2(width - t / 2, height / 2), vec2(t / 2, height / 2), "wall"));
  return s;
}

// Box spanning [x0, x1] x [y0, y1].
Primitive span_box(double x0, double x1, double y0, double y1, std::string label) {
  return make_box(vec2((x0 + x1) / 2, (y0 + y1) / 2), vec2((x1 - x0) / 2, (y1 - y0) / 2), std::move(label));
}

}  // namespace

Primitive make_sphere(Vec center, double radius, std::string label) {
  Primitive p;
  p.shape = Shape::Sphere;
  p.center = std::move(center);
  p.radius = radius;
  p.label = std::move(label);
  return p;
}

Primitive make_box(Vec center, Vec half_extents, std::string label) {
  Primitive p;
  p.shape = Shape::Box;
  p.center = std::move(center);
  p.half_extents = std::move(half_extents);
  p.label = std::move(label);
  return p;
}

Primitive make_capsule(Vec center, Vec half_axis, double radius, std::string label) {
  Primitive p;
  p.shape = Shape::Capsule;
  p.center = std::move(center);
  p.half_axis = std::move(half_axis);
  p.radius = radius;
  p.label = std::move(label);
  return p;
}

bool Bounds::contains(const Vec& p, double slack) const {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
  }
  return true;
}

std::vector<std::string> Scene::labels() const {
  std::vector<std::string> out;
  for (const auto& p : obstacles) out.push_back(p.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int Scene::label_id(const std::string& label) const {
  const auto vocab = labels();
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), label);
  if (it == vocab.end() || *it != label) throw std::invalid_argument("unknown label '" + label + "'");
  return static_cast<int>(it - vocab.begin());
}

void validate(const Scene& scene) {
  if (scene.dimension != 2 && scene.dimension != 3) {
    throw std::invalid_argument("scene dimension must be 2 or 3");
  }
  const auto d = scene.dimension;
  if (scene.bounds.lo.size() != d || scene.bounds.hi.size() != d) {
    throw std::invalid_argument("scene bounds must have one entry per dimension");
  }
  for (int i = 0; i < d; ++i) {
    if (!(scene.bounds.hi[i] > scene.bounds.lo[i])) {
      throw std::invalid_argument("scene bounds are degenerate on axis " + std::to_string(i));
    }
  }
  if (scene.obstacles.empty()) throw std::invalid_argument("scene has no primitives");
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
    const auto& p = scene.obstacles[i];
    const std::string where = "primitive " + std::to_string(i) + ": ";
    if (p.label.empty()) throw std::invalid_argument(where + "empty label");
    if (p.center.size() != d) throw std::invalid_argument(where + "center has wrong dimension");
    Vec reach;
    switch (p.shape) {
      case Shape::Sphere:
        if (!(p.radius > 0.0)) throw std::invalid_argument(where + "radius must be positive");
        reach = Vec::Constant(d, p.radius);
        break;
      case Shape::Box:
        if (p.half_extents.size() != d || !(p.half_extents.array() > 0.0).all()) {
          throw std::invalid_argument(where + "half extents must be positive");
        }
        reach = p.half_extents;
        break;
      case Shape::Capsule:
        if (!(p.radius > 0.0)) throw std::invalid_argument(where + "radius must be positive");
        if (p.half_axis.size() != d || !(p.half_axis.norm() > 0.0)) {
          throw std::invalid_argument(where + "capsule axis must be non-degenerate");
        }
        reach = p.half_axis.cwiseAbs().array() + p.radius;
        break;
    }
    const Vec lo = p.center - reach;
    const Vec hi = p.center + reach;
    if (!scene.bounds.contains(lo, 1e-9) || !scene.bounds.contains(hi, 1e-9)) {
      throw std::invalid_argument(where + "extends outside the scene bounds");
    }
  }
}

double primitive_sdf(const Primitive& prim, const Vec& p) {
  switch (prim.shape) {
    case Shape::Sphere:
      return (p - prim.center).norm() - prim.radius;
    case Shape::Box: {
      const Vec q = (p - prim.center).cwiseAbs() - prim.half_extents;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
    case Shape::Capsule:
      return segment_distance(p, prim.center - prim.half_axis, prim.center + prim.half_axis) - prim.radius;
  }
  return kInf;
}

double analytic_sdf(const Scene& scene, const Vec& p) {
  double best = kInf;
  for (const auto& prim : scene.obstacles) best = std::min(best, primitive_sdf(prim, p));
  return best;
}

double label_sdf(const Scene& scene, const std::string& label, const Vec& p) {
  double best = kInf;
  for (const auto& prim : scene.obstacles) {
    if (prim.label == label) best = std::min(best, primitive_sdf(prim, p));
  }
  if (best == kInf) throw std::invalid_argument("unknown label '" + label + "'");
  return best;
}

std::size_t nearest_primitive(const Scene& scene, const Vec& p) {
  std::size_t best = 0;
  double best_d = kInf;
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
    const double d = primitive_sdf(scene.obstacles[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::optional<RayHit> ray_cast(const Scene& scene, const Vec& origin, const Vec& direction, double max_range) {
  std::optional<RayHit> hit;
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
    const auto& prim = scene.obstacles[i];
    std::optional<double> t;
    switch (prim.shape) {
      case Shape::Sphere:
        t = ray_sphere(origin, direction, prim.center, prim.radius);
        break;
      case Shape::Box:
        t = ray_box(origin, direction, prim.center, prim.half_extents);
        break;
      case Shape::Capsule:
        t = ray_capsule(origin, direction, prim);
        break;
    }
    if (t && *t <= max_range && (!hit || *t < hit->distance)) hit = RayHit{*t, i};
  }
  return hit;
}

std::string scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["name"] = scene.name;
  j["dimension"] = scene.dimension;
  j["bounds"] = {{"min", vec_to_json(scene.bounds.lo)}, {"max", vec_to_json(scene.bounds.hi)}};
  auto prims = nlohmann::json::array();
  for (const auto& p : scene.obstacles) {
    nlohmann::json e;
    e["shape"] = shape_name(p.shape, scene.dimension);
    e["label"] = p.label;
    e["center"] = vec_to_json(p.center);
    if (p.shape == Shape::Box) e["half_extents"] = vec_to_json(p.half_extents);
    if (p.shape == Shape::Capsule) e["half_axis"] = vec_to_json(p.half_axis);
    if (p.shape != Shape::Box) e["radius"] = p.radius;
    prims.push_back(std::move(e));
  }
  j["primitives"] = std::move(prims);
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Scene s;
  s.name = j.value("name", "");
  s.dimension = j.at("dimension").get<int>();
  s.bounds.lo = vec_from_json(j.at("bounds").at("min"));
  s.bounds.hi = vec_from_json(j.at("bounds").at("max"));
  const auto& prims = j.at("primitives");
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const auto& e = prims[i];
    const auto shape = e.at("shape").get<std::string>();
    const auto label = e.value("label", "");
    const Vec center = vec_from_json(e.at("center"));
    if (shape == "circle" || shape == "sphere") {
      s.obstacles.push_back(make_sphere(center, e.at("radius").get<double>(), label));
    } else if (shape == "box") {
      s.obstacles.push_back(make_box(center, vec_from_json(e.at("half_extents")), label));
    } else if (shape == "capsule") {
      s.obstacles.push_back(
          make_capsule(center, vec_from_json(e.at("half_axis")), e.at("radius").get<double>(), label));
    } else {
      throw std::invalid_argument("primitive " + std::to_string(i) + ": unknown shape '" + shape + "'");
    }
  }
  validate(s);
  return s;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scene_to_json(scene);
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return scene_from_json(buf.str());
}

Scene single_disk_scene() {
  Scene s = walled_room("single_disk", 3.2, 3.2);
  s.obstacles.push_back(make_sphere(vec2(1.6, 1.6), 0.4, "disk"));
  return s;
}

Scene rooms_scene() {
  Scene s = walled_room("rooms", 10.0, 7.6);
  // Corridor along the bottom, two rooms above, each reached through a doorway.
  s.obstacles.push_back(span_box(0.3, 2.0, 3.2, 3.5, "wall"));
  s.obstacles.push_back(span_box(4.0, 6.4, 3.2, 3.5, "wall"));
  s.obstacles.push_back(span_box(8.4, 9.7, 3.2, 3.5, "wall"));
  s.obstacles.push_back(span_box(5.05, 5.35, 3.5, 7.3, "wall"));
  s.obstacles.push_back(span_box(0.3, 2.0, 5.6, 7.3, "bed"));
  s.obstacles.push_back(make_sphere(vec2(4.3, 6.7), 0.2, "lamp"));
  s.obstacles.push_back(span_box(8.9, 9.7, 6.3, 7.3, "refrigerator"));
  s.obstacles.push_back(span_box(7.0, 8.0, 5.3, 6.0, "table"));
  s.obstacles.push_back(span_box(5.35, 6.4, 6.8, 7.3, "sink"));
  s.obstacles.push_back(span_box(0.3, 2.4, 0.3, 1.0, "sofa"));
  s.obstacles.push_back(make_sphere(vec2(8.9, 1.2), 0.3, "plant"));
  s.obstacles.push_back(span_box(4.6, 6.2, 0.3, 0.7, "shelf"));
  return s;
}

Scene clutter_scene() {
  Scene s = walled_room("clutter", 10.0, 7.6);
  s.obstacles.push_back(make_sphere(vec2(2.0, 2.0), 0.3, "chair"));
  s.obstacles.push_back(make_sphere(vec2(4.6, 5.4), 0.35, "plant"));
  s.obstacles.push_back(make_sphere(vec2(7.4, 1.6), 0.25, "trash can"));
  s.obstacles.push_back(make_sphere(vec2(5.4, 3.0), 0.3, "stool"));
  s.obstacles.push_back(make_sphere(vec2(7.6, 5.8), 0.25, "lamp"));
  s.obstacles.push_back(make_sphere(vec2(1.8, 5.4), 0.4, "barrel"));
  s.obstacles.push_back(make_sphere(vec2(3.4, 3.6), 0.2, "pillar"));
  s.obstacles.push_back(make_capsule(vec2(8.6, 3.6), vec2(0.0, 0.35), 0.2, "coat rack"));
  return s;
}

Scene two_chamber_scene() {
  Scene s = walled_room("two_chamber", 10.0, 7.6);
  // Dividing wall with a single 2 m gap.
  s.obstacles.push_back(span_box(4.85, 5.15, 0.3, 2.9, "wall"));
  s.obstacles.push_back(span_box(4.85, 5.15, 4.9, 7.3, "wall"));
  s.obstacles.push_back(span_box(1.0, 2.8, 0.3, 1.1, "desk"));
  s.obstacles.push_back(span_box(0.3, 1.2, 5.4, 7.3, "cabinet"));
  s.obstacles.push_back(make_sphere(vec2(2.6, 4.8), 0.25, "chair"));
  s.obstacles.push_back(make_sphere(vec2(2.6, 2.6), 0.2, "bin"));
  s.obstacles.push_back(span_box(6.2, 8.6, 6.4, 7.3, "couch"));
  s.obstacles.push_back(span_box(9.3, 9.7, 2.0, 3.6, "tv"));
  s.obstacles.push_back(make_sphere(vec2(6.6, 1.6), 0.3, "plant"));
  s.obstacles.push_back(span_box(7.0, 8.0, 3.8, 4.6, "piano"));
  return s;
}

std::vector<Scene> desk_suite() { return {rooms_scene(), clutter_scene(), two_chamber_scene()}; }

Scene bundled_scene(const std::string& name) {
  if (name == "single_disk") return single_disk_scene();
  if (name == "rooms") return rooms_scene();
  if (name == "clutter") return clutter_scene();
  if (name == "two_chamber") return two_chamber_scene();
  throw std::invalid_argument("unknown bundled scene '" + name + "'");
}

}  // namespace semnav

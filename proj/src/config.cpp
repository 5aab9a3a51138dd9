#include "semnav/config.hpp"

#include <fstream>
#include <stdexcept>

namespace semnav {

using nlohmann::json;

json default_run_config() {
  const TrainConfig t;
  const FieldConfig f;
  const CaptureConfig c;
  const PlannerParams p;
  const SuiteConfig s;
  const NoiseModel n;
  return json{
      {"seed", 1},
      {"out", "out"},
      {"scene", {{"names", {"rooms", "clutter", "two_chamber"}}, {"preview_cell", 0.05}}},
      {"capture",
       {{"scene", "rooms"},
        {"spacing", c.spacing},
        {"yaws", c.yaws_per_position},
        {"clearance", c.clearance},
        {"fov", c.intrinsics.fov},
        {"width", c.intrinsics.width},
        {"max_range", c.intrinsics.max_range},
        {"sigma_depth", 0.0},
        {"sigma_pose", 0.0}}},
      {"train",
       {{"frames", ""},
        {"steps", t.steps},
        {"batch_size", t.batch_size},
        {"frames_per_batch", t.frames_per_batch},
        {"lr", t.lr},
        {"lambda_r", t.lambda_r},
        {"lambda_s", t.lambda_s},
        {"samples_per_ray", t.samples_per_ray},
        {"behind_fraction", t.behind_fraction},
        {"behind_depth", t.behind_depth},
        {"near_fraction", t.near_fraction},
        {"near_depth", t.near_depth},
        {"weight_temperature", t.weight_temperature},
        {"logit_temperature", t.logit_temperature},
        {"invert_weight_sign", t.invert_weight_sign},
        {"log_every", t.log_every},
        {"fourier_bands", f.fourier_bands},
        {"layers", f.layers},
        {"width", f.width},
        {"embedding_dim", kDefaultEmbeddingDim},
        {"embedding_seed", 1},
        {"embeddings", ""}}},
      {"bias",
       {{"sigma_depth", n.sigma_depth},
        {"sigma_pose", n.sigma_pose},
        {"true_dist", 1.0},
        {"trials", 100000},
        {"ns", {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000}},
        {"dim", 3},
        {"n_eff", 0.0},
        {"clutter_factor", 1.0},
        {"sweep_sigma_c", {0.01, 0.015, 0.02, 0.03}},
        {"sweep_n_eff", {10, 100, 1000, 10000}},
        {"sweep_clutter", {1.0, 2.0, 3.0}},
        {"sweep_trials", 4000}}},
      {"plan",
       {{"checkpoint", ""},
        {"planner", "gradient"},
        {"cell_size", 0.1},
        {"start", json::array()},
        {"goal", json::array()},
        {"query", ""},
        {"embeddings", ""},
        {"sdf_correction", 0.0},
        {"d_min", p.d_min},
        {"clearance_margin", p.clearance_margin},
        {"n_points", p.n_points},
        {"n_targets", p.n_targets},
        {"lambda_o", p.lambda_o},
        {"lambda_n", p.lambda_n},
        {"lambda_s", p.lambda_s},
        {"lambda_d", p.lambda_d},
        {"lr", p.lr},
        {"max_iters", p.max_iters},
        {"convergence_tol", p.convergence_tol},
        {"convergence_window", p.convergence_window},
        {"init_cell_size", p.init_cell_size},
        {"feasibility_tol", p.feasibility_tol},
        {"dense_step", p.dense_step}}},
      {"eval",
       {{"scenes", {"rooms", "clutter", "two_chamber"}},
        {"n_pairs", s.n_pairs},
        {"n_starts", s.n_starts},
        {"grid_cells", s.grid_cells},
        {"gradient", s.gradient},
        {"oracle", s.oracle},
        {"audit_tolerance", s.audit_tolerance},
        {"checkpoints", ""}}},
  };
}

namespace {

bool compatible(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

void merge_into(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) throw std::invalid_argument("config: '" + path + "' must be an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("config: unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (!compatible(slot, it.value())) throw std::invalid_argument("config: wrong type for '" + key + "'");
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else if (slot.is_number_float()) {
      slot = it.value().get<double>();
    } else {
      slot = it.value();
    }
  }
}

std::uint64_t global_seed(const json& run) { return run.at("seed").get<std::uint64_t>(); }

}  // namespace

json merge_config(const json& base, const json& overrides) {
  json out = base;
  merge_into(out, overrides, "");
  return out;
}

json load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return merge_config(default_run_config(), doc);
}

json parse_flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

CaptureConfig capture_config(const json& run) {
  const json& b = run.at("capture");
  CaptureConfig c;
  c.spacing = b.at("spacing").get<double>();
  c.yaws_per_position = b.at("yaws").get<int>();
  c.clearance = b.at("clearance").get<double>();
  c.intrinsics.fov = b.at("fov").get<double>();
  c.intrinsics.width = b.at("width").get<int>();
  c.intrinsics.max_range = b.at("max_range").get<double>();
  c.noise.sigma_depth = b.at("sigma_depth").get<double>();
  c.noise.sigma_pose = b.at("sigma_pose").get<double>();
  c.seed = global_seed(run);
  return c;
}

TrainConfig train_config(const json& run) {
  const json& b = run.at("train");
  TrainConfig t;
  t.steps = b.at("steps").get<int>();
  t.batch_size = b.at("batch_size").get<int>();
  t.frames_per_batch = b.at("frames_per_batch").get<int>();
  t.lr = b.at("lr").get<double>();
  t.lambda_r = b.at("lambda_r").get<double>();
  t.lambda_s = b.at("lambda_s").get<double>();
  t.samples_per_ray = b.at("samples_per_ray").get<int>();
  t.behind_fraction = b.at("behind_fraction").get<double>();
  t.behind_depth = b.at("behind_depth").get<double>();
  t.near_fraction = b.at("near_fraction").get<double>();
  t.near_depth = b.at("near_depth").get<double>();
  t.weight_temperature = b.at("weight_temperature").get<double>();
  t.logit_temperature = b.at("logit_temperature").get<double>();
  t.invert_weight_sign = b.at("invert_weight_sign").get<bool>();
  t.log_every = b.at("log_every").get<int>();
  t.seed = global_seed(run);
  t.validate();
  return t;
}

FieldConfig field_config(const json& run, const Scene& scene) {
  const json& b = run.at("train");
  FieldConfig f = default_field_config(scene, global_seed(run));
  f.fourier_bands = b.at("fourier_bands").get<int>();
  f.layers = b.at("layers").get<int>();
  f.width = b.at("width").get<int>();
  f.sem_dim = b.at("embedding_dim").get<int>();
  f.validate();
  return f;
}

PlannerParams planner_params(const json& run) {
  const json& b = run.at("plan");
  PlannerParams p;
  p.d_min = b.at("d_min").get<double>();
  p.clearance_margin = b.at("clearance_margin").get<double>();
  p.n_points = b.at("n_points").get<int>();
  p.n_targets = b.at("n_targets").get<int>();
  p.lambda_o = b.at("lambda_o").get<double>();
  p.lambda_n = b.at("lambda_n").get<double>();
  p.lambda_s = b.at("lambda_s").get<double>();
  p.lambda_d = b.at("lambda_d").get<double>();
  p.lr = b.at("lr").get<double>();
  p.max_iters = b.at("max_iters").get<int>();
  p.convergence_tol = b.at("convergence_tol").get<double>();
  p.convergence_window = b.at("convergence_window").get<int>();
  p.init_cell_size = b.at("init_cell_size").get<double>();
  p.feasibility_tol = b.at("feasibility_tol").get<double>();
  p.dense_step = b.at("dense_step").get<double>();
  p.seed = global_seed(run);
  p.validate();
  return p;
}

SuiteConfig suite_config(const json& run) {
  const json& b = run.at("eval");
  SuiteConfig s;
  s.n_pairs = b.at("n_pairs").get<int>();
  s.n_starts = b.at("n_starts").get<int>();
  s.grid_cells = b.at("grid_cells").get<std::vector<double>>();
  s.gradient = b.at("gradient").get<bool>();
  s.oracle = b.at("oracle").get<bool>();
  s.audit_tolerance = b.at("audit_tolerance").get<double>();
  s.planner = planner_params(run);
  s.seed = global_seed(run);
  if (s.grid_cells.empty() && !s.gradient) throw std::invalid_argument("config: eval has no planners");
  for (double c : s.grid_cells) {
    if (!(c > 0.0)) throw std::invalid_argument("config: eval.grid_cells must be positive");
  }
  return s;
}

NoiseModel bias_noise(const json& run) {
  const json& b = run.at("bias");
  NoiseModel n{b.at("sigma_depth").get<double>(), b.at("sigma_pose").get<double>()};
  n.validate();
  return n;
}

Scene resolve_scene(const std::string& name_or_path) {
  const std::filesystem::path p(name_or_path);
  if (p.extension() == ".json") return load_scene(p);
  return bundled_scene(name_or_path);
}

}  // namespace semnav

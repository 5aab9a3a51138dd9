#include "semnav/cli.hpp"

#include "semnav/bias.hpp"
#include "semnav/config.hpp"
#include "semnav/eval.hpp"
#include "semnav/occupancy.hpp"
#include "semnav/planner.hpp"
#include "semnav/train.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace semnav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects the files a command writes so they can be listed in the manifest.
class OutputDir {
 public:
  OutputDir(const std::string& command, const json& run) : command_(command), run_(run) {
    root_ = run.at("out").get<std::string>();
    fs::create_directories(root_);
    std::ofstream(root_ / "config.json") << run.dump(2) << "\n";
  }

  fs::path file(const std::string& name) {
    files_.push_back(name);
    return root_ / name;
  }

  void finish(const json& result) const {
    json files = json::array();
    for (const auto& name : files_) {
      const fs::path p = root_ / name;
      files.push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"fnv1a", file_digest(p.string())}});
    }
    const json manifest{{"command", command_}, {"seed", run_.at("seed")}, {"config", "config.json"},
                        {"files", files}, {"result", result}};
    std::ofstream(root_ / "manifest.json") << manifest.dump(2) << "\n";
  }

 private:
  std::string command_;
  const json& run_;
  fs::path root_;
  std::vector<std::string> files_;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

Vec vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) {
    throw std::invalid_argument(std::string("plan: ") + what + " must be [x, y] or [x, y, z]");
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

FrameDataset frames_for_training(const json& run, const Scene& scene, std::ostream& log) {
  const std::string path = run.at("train").at("frames").get<std::string>();
  if (!path.empty()) return load_frames(path);
  FrameDataset ds = capture_scene(scene, capture_config(run));
  log << "captured " << ds.frames.size() << " frames of " << scene.name << "\n";
  return ds;
}

EmbeddingTable table_for_training(const json& run, const FrameDataset& frames) {
  const json& b = run.at("train");
  const std::string path = b.at("embeddings").get<std::string>();
  EmbeddingTable table = path.empty() ? synth_table(frames.vocabulary, b.at("embedding_dim").get<int>(),
                                                    b.at("embedding_seed").get<std::uint64_t>())
                                      : load_table(path);
  for (const auto& label : frames.vocabulary) {
    if (!table.contains(label)) throw std::invalid_argument("embedding table lacks label '" + label + "'");
  }
  return table;
}

// Trains on `scene` and writes <prefix>field.ckpt, <prefix>embeddings.tsv and
// <prefix>train_log.txt.
std::pair<FieldModel, EmbeddingTable> train_and_save(const json& run, const Scene& scene, OutputDir& out,
                                                     const std::string& prefix, std::ostream& log) {
  const FrameDataset frames = frames_for_training(run, scene, log);
  EmbeddingTable table = table_for_training(run, frames);
  const TrainConfig tc = train_config(run);
  FieldConfig fc = field_config(run, scene);
  fc.input_dim = frames.dimension;
  std::ofstream train_log(out.file(prefix + "train_log.txt"));
  auto on_step = [&](int step, const FieldModel&, const TrainLogEntry& e) {
    if (step % tc.log_every == 0 || step == tc.steps) {
      write_log_line(train_log, e);
      write_log_line(log, e);
    }
  };
  TrainResult result = train(frames, table, fc, tc, on_step);
  result.model.save(out.file(prefix + "field.ckpt"));
  save_table(table, out.file(prefix + "embeddings.tsv"));
  return {std::move(result.model), std::move(table)};
}

json loss_json(const LossBreakdown& t) {
  return {{"obstacle", t.obstacle}, {"spacing", t.spacing}, {"semantic", t.semantic}, {"length", t.length},
          {"total", t.total}};
}

int exit_code(PlanStatus s) {
  switch (s) {
    case PlanStatus::Ok: return kExitOk;
    case PlanStatus::NoPath: return kExitNoPath;
    case PlanStatus::Infeasible: return kExitInfeasible;
  }
  return kExitError;
}

}  // namespace

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int cmd_scene(const json& run, std::ostream& log) {
  OutputDir out("scene", run);
  const json& b = run.at("scene");
  const double cell = b.at("preview_cell").get<double>();
  if (!(cell > 0.0)) throw std::invalid_argument("scene.preview_cell must be positive");
  json written = json::array();
  for (const auto& name : b.at("names").get<std::vector<std::string>>()) {
    const Scene scene = resolve_scene(name);
    validate(scene);
    save_scene(scene, out.file(scene.name + ".scene.json"));
    // Planar raster; 3D scenes are sliced at mid height.
    const OccupancyGrid grid =
        OccupancyGrid::covering({scene.bounds.lo.head(2), scene.bounds.hi.head(2)}, cell);
    std::ofstream csv(out.file(scene.name + ".preview.csv"));
    csv << "ix,iy,x,y,sdf,occupied\n";
    Vec p = (scene.bounds.lo + scene.bounds.hi) / 2.0;
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        const Vec c = grid.center({ix, iy});
        p[0] = c[0];
        p[1] = c[1];
        const double d = analytic_sdf(scene, p);
        csv << ix << ',' << iy << ',' << fmt("%.4f", c[0]) << ',' << fmt("%.4f", c[1]) << ',' << fmt("%.6f", d)
            << ',' << (d < 0.0 ? 1 : 0) << '\n';
      }
    }
    log << "scene " << scene.name << ": " << scene.obstacles.size() << " primitives, preview " << grid.nx << "x"
        << grid.ny << "\n";
    written.push_back(scene.name);
  }
  out.finish({{"scenes", written}});
  return kExitOk;
}

int cmd_capture(const json& run, std::ostream& log) {
  OutputDir out("capture", run);
  const Scene scene = resolve_scene(run.at("capture").at("scene").get<std::string>());
  const FrameDataset ds = capture_scene(scene, capture_config(run));
  save_frames(ds, out.file("frames.bin"));
  std::size_t points = 0;
  for (const auto& f : ds.frames) {
    for (int i = 0; i < f.pixel_count(); ++i) points += f.valid(i) ? 1 : 0;
  }
  log << "captured " << ds.frames.size() << " frames, " << points << " valid pixels\n";
  out.finish({{"scene", scene.name}, {"frames", ds.frames.size()}, {"valid_pixels", points}});
  return kExitOk;
}

int cmd_train(const json& run, std::ostream& log) {
  OutputDir out("train", run);
  const Scene scene = resolve_scene(run.at("capture").at("scene").get<std::string>());
  const auto [model, table] = train_and_save(run, scene, out, "", log);
  out.finish({{"scene", scene.name}, {"parameters", model.parameter_count()}});
  return kExitOk;
}

int cmd_bias(const json& run, std::ostream& log) {
  OutputDir out("bias", run);
  const json& b = run.at("bias");
  const NoiseModel noise = bias_noise(run);
  const std::uint64_t seed = run.at("seed").get<std::uint64_t>();
  const double true_dist = b.at("true_dist").get<double>();
  const int dim = b.at("dim").get<int>();

  const BiasCurve curve = bias_curve(noise, true_dist, b.at("ns").get<std::vector<int>>(),
                                     b.at("trials").get<long>(), seed, dim);
  {
    std::ofstream csv(out.file("bias_curve.csv"));
    write_bias_csv(csv, curve);
  }

  double n_eff = b.at("n_eff").get<double>();
  if (!(n_eff > 0.0)) {
    if (noise.sigma_c() == 0.0) {
      n_eff = 1.0;
    } else {
      const Scene scene = resolve_scene(run.at("capture").at("scene").get<std::string>());
      CaptureConfig cc = capture_config(run);
      cc.noise = {noise.sigma_depth, noise.sigma_pose};
      std::vector<Vec> cloud;
      for (const auto& p : unproject_all(capture_scene(scene, cc))) cloud.push_back(p.position);
      n_eff = estimate_effective_count(cloud, noise.sigma_c(), seed);
      log << "measured n_eff " << fmt("%.2f", n_eff) << " on " << scene.name << "\n";
    }
  }
  CorrectionParams cp;
  cp.n_eff = n_eff;
  cp.clutter_factor = b.at("clutter_factor").get<double>();
  cp.true_dist = true_dist;
  cp.trials = b.at("sweep_trials").get<long>();
  cp.seed = seed;
  cp.dim = dim;
  const double correction = correction_constant(noise, cp);

  std::ofstream sweep(out.file("bias_sweep.csv"));
  sweep << "sigma_c,n_eff,clutter_factor,correction\n";
  double lo = kMaxCorrection;
  double hi = 0.0;
  for (double sc : b.at("sweep_sigma_c").get<std::vector<double>>()) {
    for (double n : b.at("sweep_n_eff").get<std::vector<double>>()) {
      for (double k : b.at("sweep_clutter").get<std::vector<double>>()) {
        CorrectionParams p = cp;
        p.n_eff = n;
        p.clutter_factor = k;
        const double c = correction_constant(NoiseModel{sc, 0.0}, p);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        sweep << fmt("%.4f", sc) << ',' << fmt("%.1f", n) << ',' << fmt("%.2f", k) << ',' << fmt("%.6f", c) << '\n';
      }
    }
  }
  sweep.close();

  const json result{{"sigma_c", noise.sigma_c()},     {"n_eff", n_eff},
                    {"clutter_factor", cp.clutter_factor}, {"correction", correction},
                    {"curve_monotone", curve.monotone_non_increasing()}, {"sweep_min", lo},
                    {"sweep_max", hi}};
  std::ofstream(out.file("correction.json")) << result.dump(2) << "\n";
  log << "sigma_c " << fmt("%.4f", noise.sigma_c()) << "  correction " << fmt("%.4f", correction)
      << "  sweep range [" << fmt("%.3f", lo) << ", " << fmt("%.3f", hi) << "]\n";
  out.finish(result);
  return kExitOk;
}

int cmd_plan(const json& run, std::ostream& log) {
  OutputDir out("plan", run);
  const json& b = run.at("plan");
  const std::string checkpoint = b.at("checkpoint").get<std::string>();
  if (checkpoint.empty()) throw std::invalid_argument("plan: checkpoint is required");
  FieldModel model = FieldModel::load(checkpoint);
  model.set_sdf_bias_correction(b.at("sdf_correction").get<double>());
  const PlannerParams params = planner_params(run);

  const Vec start = vec_from_json(b.at("start"), "start");
  const bool has_goal = !b.at("goal").empty();
  const std::string query_text = b.at("query").get<std::string>();
  if (has_goal == !query_text.empty()) throw std::invalid_argument("plan: give exactly one of goal and query");
  std::optional<Vec> goal;
  if (has_goal) goal = vec_from_json(b.at("goal"), "goal");
  std::optional<Eigen::VectorXd> query;
  if (!query_text.empty()) {
    std::string table_path = b.at("embeddings").get<std::string>();
    if (table_path.empty()) table_path = (fs::path(checkpoint).parent_path() / "embeddings.tsv").string();
    query = make_query(load_table(table_path), query_text).vector;
  }

  const std::string planner = b.at("planner").get<std::string>();
  const Bounds bounds = model.config().bounds;
  PlanStatus status = PlanStatus::NoPath;
  Path path;
  json summary;
  if (planner == "grid") {
    const OccupancyGrid grid = occupancy_from_field(model, bounds, b.at("cell_size").get<double>(),
                                                    params.clearance());
    const GridPlanResult r = goal ? grid_plan(grid, start, *goal) : grid_plan(grid, model, start, *query);
    status = r.status;
    path = r.path;
    summary["start_cell"] = {r.start_cell.x, r.start_cell.y};
    summary["goal_cell"] = {r.goal_cell.x, r.goal_cell.y};
  } else if (planner == "gradient") {
    GradientPlanRequest req;
    req.start = start;
    req.goal = goal;
    req.query = query;
    req.bounds = bounds;
    const GradientPlanResult r = gradient_plan(model, req, params);
    status = r.status;
    path = r.path;
    summary["iterations"] = r.iterations;
    summary["converged"] = r.converged;
    summary["best_iteration"] = r.best_iteration;
    summary["min_dense_sdf"] = r.min_dense_sdf;
    summary["initial_loss"] = loss_json(r.initial);
    summary["final_loss"] = loss_json(r.final_terms);
  } else {
    throw std::invalid_argument("plan: planner must be 'grid' or 'gradient'");
  }
  if (!path.waypoints.empty()) annotate(path, model, query ? &*query : nullptr);
  summary["status"] = to_string(status);
  summary["planner"] = planner;
  summary["waypoints"] = path.waypoints.size();
  summary["length"] = path.waypoints.empty() ? 0.0 : path.length();
  const json doc{{"summary", summary}, {"waypoints", path_to_json(path)}};
  std::ofstream(out.file("path.json")) << doc.dump(2) << "\n";
  log << planner << ": " << to_string(status) << ", " << path.waypoints.size() << " waypoints, length "
      << fmt("%.3f", summary["length"].get<double>()) << "\n";
  out.finish(summary);
  return exit_code(status);
}

int cmd_eval(const json& run, std::ostream& log) {
  OutputDir out("eval", run);
  const json& b = run.at("eval");
  const SuiteConfig suite = suite_config(run);
  const std::string ck_dir = b.at("checkpoints").get<std::string>();
  const double sdf_correction = run.at("plan").at("sdf_correction").get<double>();

  std::vector<PlannerReport> length;
  std::vector<PlannerReport> semantic;
  std::vector<SceneEvaluation> evals;
  for (const auto& name : b.at("scenes").get<std::vector<std::string>>()) {
    const Scene scene = resolve_scene(name);
    FieldModel model;
    EmbeddingTable table;
    if (ck_dir.empty()) {
      std::tie(model, table) = train_and_save(run, scene, out, scene.name + ".", log);
    } else {
      model = FieldModel::load(fs::path(ck_dir) / (scene.name + ".field.ckpt"));
      table = load_table(fs::path(ck_dir) / (scene.name + ".embeddings.tsv"));
    }
    model.set_sdf_bias_correction(sdf_correction);
    log << "evaluating " << scene.name << "\n";
    evals.push_back(evaluate_scene(scene, model, table, suite));
    length.push_back(evals.back().length);
    semantic.push_back(evals.back().semantic);
  }

  std::ofstream report(out.file("report.txt"));
  write_table(report, "Average length multiple over the per-pair best", length);
  report << "\n";
  write_table(report, "Average relative terminal similarity", semantic);
  report << "\nCollision audit (analytic SDF, 1 cm sampling)\n";
  std::ofstream audit(out.file("audit.csv"));
  audit << "scene,planner,threshold,paths,violating_paths,min_clearance\n";
  for (const auto& e : evals) {
    for (std::size_t k = 0; k < e.audit.size(); ++k) {
      const AuditReport& a = e.audit[k];
      audit << e.scene << ',' << e.length.planners[k] << ',' << fmt("%.4f", a.threshold) << ',' << a.paths.size()
            << ',' << a.violating_paths << ',' << fmt("%.6f", a.min_clearance) << '\n';
      char line[160];
      std::snprintf(line, sizeof line, "  %-12s %-12s paths %4zu  violating %3d  min clearance %.4f\n",
                    e.scene.c_str(), e.length.planners[k].c_str(), a.paths.size(), a.violating_paths,
                    a.min_clearance);
      report << line;
    }
  }
  audit.close();
  report.close();
  std::ofstream trials(out.file("trials.csv"));
  std::vector<PlannerReport> all = length;
  all.insert(all.end(), semantic.begin(), semantic.end());
  write_trials_csv(trials, all);
  trials.close();

  std::ifstream echo(fs::path(run.at("out").get<std::string>()) / "report.txt");
  log << echo.rdbuf();
  out.finish({{"scenes", evals.size()}});
  return kExitOk;
}

std::vector<std::string> command_names() { return {"scene", "capture", "train", "bias", "plan", "eval"}; }

std::vector<std::string> command_blocks(const std::string& command) {
  if (command == "scene") return {"scene"};
  if (command == "capture") return {"capture"};
  if (command == "train") return {"train", "capture"};
  if (command == "bias") return {"bias", "capture"};
  if (command == "plan") return {"plan"};
  if (command == "eval") return {"eval", "plan", "train", "capture"};
  throw std::invalid_argument("unknown command '" + command + "'");
}

int run_command(const std::string& command, const json& run, std::ostream& log) {
  if (command == "scene") return cmd_scene(run, log);
  if (command == "capture") return cmd_capture(run, log);
  if (command == "train") return cmd_train(run, log);
  if (command == "bias") return cmd_bias(run, log);
  if (command == "plan") return cmd_plan(run, log);
  if (command == "eval") return cmd_eval(run, log);
  throw std::invalid_argument("unknown command '" + command + "'");
}

}  // namespace semnav

#include "semnav/cli.hpp"
#include "semnav/config.hpp"
#include "semnav/field.hpp"

#include "support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace semnav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semnav_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SEMNAV_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// A small single-disk model, trained once for the whole file.
const fs::path& trained_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("train");
    json run = default_run_config();
    run["out"] = d.string();
    run["capture"]["scene"] = "single_disk";
    run["capture"]["spacing"] = 0.6;
    run["train"]["steps"] = 300;
    run["train"]["width"] = 48;
    run["train"]["layers"] = 2;
    run["train"]["embedding_dim"] = 16;
    run["train"]["log_every"] = 50;
    std::ostringstream log;
    REQUIRE(cmd_train(run, log) == kExitOk);
    return d;
  }();
  return dir;
}

json plan_run(const fs::path& out) {
  json run = default_run_config();
  run["out"] = out.string();
  run["plan"]["checkpoint"] = (trained_dir() / "field.ckpt").string();
  run["plan"]["start"] = {0.7, 0.7};
  run["plan"]["goal"] = {2.5, 2.5};
  run["plan"]["d_min"] = 0.1;
  run["plan"]["clearance_margin"] = 0.0;
  run["plan"]["max_iters"] = 80;
  return run;
}

}  // namespace

TEST_CASE("config merge rejects unknown keys and wrong types") {
  const json base = default_run_config();
  CHECK(merge_config(base, json{{"train", {{"steps", 7}}}})["train"]["steps"] == 7);
  CHECK(merge_config(base, json{{"plan", {{"lr", 1}}}})["plan"]["lr"].is_number_float());
  try {
    merge_config(base, json{{"train", {{"stepz", 7}}}});
    FAIL("accepted an unknown key");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("train.stepz") != std::string::npos);
  }
  try {
    merge_config(base, json{{"train", {{"steps", "many"}}}});
    FAIL("accepted a string for an integer");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("train.steps") != std::string::npos);
  }
  CHECK_THROWS(merge_config(base, json{{"train", {{"steps", 1.5}}}}));
  CHECK_THROWS(merge_config(base, json{{"eval", 3}}));
  json bad = base;
  bad["train"]["batch_size"] = 1;
  CHECK_THROWS(train_config(bad));
  CHECK_THROWS(run_command("fly", base, std::cout));
}

TEST_CASE("scene command: three scenes, repeatable, previews agree with the sdf") {
  const fs::path a = scratch("scene_a");
  const fs::path b = scratch("scene_b");
  json run = default_run_config();
  std::ostringstream log;
  run["out"] = a.string();
  REQUIRE(cmd_scene(run, log) == kExitOk);
  run["out"] = b.string();
  REQUIRE(cmd_scene(run, log) == kExitOk);

  for (const std::string name : {"rooms", "clutter", "two_chamber"}) {
    for (const std::string ext : {".scene.json", ".preview.csv"}) {
      REQUIRE(fs::exists(a / (name + ext)));
      CHECK(slurp(a / (name + ext)) == slurp(b / (name + ext)));
    }
    const Scene loaded = load_scene(a / (name + ".scene.json"));
    CHECK(scene_to_json(loaded) == scene_to_json(bundled_scene(name)));

    std::ifstream csv(a / (name + ".preview.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "ix,iy,x,y,sdf,occupied");
    std::vector<std::string> rows;
    while (std::getline(csv, line)) rows.push_back(line);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    const Scene scene = bundled_scene(name);
    for (int i = 0; i < 1000; ++i) {
      std::istringstream row(rows[pick(rng)]);
      std::string field;
      std::vector<double> v;
      while (std::getline(row, field, ',')) v.push_back(std::stod(field));
      REQUIRE(v.size() == 6);
      const double truth = analytic_sdf(scene, testing::v2(v[2], v[3]));
      CHECK(std::abs(v[4] - truth) <= 5e-7 + 1e-12);
      if (std::abs(truth) > 1e-6) CHECK((v[5] == 1.0) == (truth < 0.0));
    }
  }
  const json manifest = read_json(a / "manifest.json");
  CHECK(manifest["command"] == "scene");
  CHECK(manifest["files"].size() == 6);
  CHECK(read_json(a / "config.json")["out"] == a.string());
}

TEST_CASE("manifest digests match the files") {
  const fs::path d = scratch("capture");
  json run = default_run_config();
  run["out"] = d.string();
  run["capture"]["scene"] = "single_disk";
  run["capture"]["spacing"] = 1.0;
  std::ostringstream log;
  REQUIRE(cmd_capture(run, log) == kExitOk);
  const json manifest = read_json(d / "manifest.json");
  bool found = false;
  for (const auto& f : manifest["files"]) {
    const fs::path p = d / f["path"].get<std::string>();
    CHECK(f["fnv1a"] == file_digest(p.string()));
    CHECK(f["bytes"] == fs::file_size(p));
    found |= f["path"] == "frames.bin";
  }
  CHECK(found);
  CHECK(load_frames(d / "frames.bin").frames.size() > 0);
}

TEST_CASE("train then plan through the command layer") {
  const fs::path& t = trained_dir();
  for (const std::string f : {"field.ckpt", "embeddings.tsv", "train_log.txt", "config.json", "manifest.json"}) {
    CHECK(fs::exists(t / f));
  }

  const fs::path g = scratch("plan_gradient");
  std::ostringstream log;
  const int rc = cmd_plan(plan_run(g), log);
  const json doc = read_json(g / "path.json");
  const json& s = doc["summary"];
  CHECK(s["status"] == (rc == kExitOk ? "ok" : rc == kExitNoPath ? "no_path" : "infeasible"));
  REQUIRE(rc == kExitOk);
  CHECK(doc["waypoints"].size() >= 2);
  CHECK(doc["waypoints"][0]["x"] == 0.7);
  CHECK(doc["waypoints"][0]["y"] == 0.7);
  for (const char* key : {"obstacle", "spacing", "semantic", "length"}) {
    CHECK(s["initial_loss"].contains(key));
    CHECK(s["final_loss"].contains(key));
  }
  CHECK(s["final_loss"]["total"].get<double>() <= s["initial_loss"]["total"].get<double>());

  json grid = plan_run(scratch("plan_grid"));
  grid["plan"]["planner"] = "grid";
  CHECK(cmd_plan(grid, log) == kExitOk);

  json semantic = plan_run(scratch("plan_query"));
  semantic["plan"]["goal"] = json::array();
  semantic["plan"]["query"] = "disk";
  CHECK(cmd_plan(semantic, log) == kExitOk);
  semantic["plan"]["query"] = "piano";
  CHECK_THROWS(cmd_plan(semantic, log));
}

TEST_CASE("binary: exit codes and flags") {
  const fs::path& t = trained_dir();
  const std::string ckpt = (t / "field.ckpt").string();
  const fs::path out = scratch("bin");
  CHECK(run_binary("--out " + (out / "s").string() + " scene --names single_disk") == kExitOk);
  CHECK(fs::exists(out / "s" / "single_disk.scene.json"));

  CHECK(run_binary("--out " + (out / "e").string() + " plan") == kExitError);
  CHECK(run_binary("--out " + (out / "e").string() + " train --no-such-flag 1") != kExitOk);

  // Hand-set field: sdf = |x - 1.6| - 0.2 over a 3.2 m square, a wall down the middle.
  FieldConfig fc = default_field_config(bundled_scene("single_disk"));
  fc.layers = 1;
  fc.width = 16;
  fc.fourier_bands = 0;
  fc.sem_dim = 8;
  FieldModel wall(fc);
  for (auto& p : wall.parameters()) p.tensor.mutable_value().setZero();
  auto& w = wall.parameters();
  w[0].tensor.mutable_value()(0, 0) = 1.0;
  w[0].tensor.mutable_value()(0, 1) = -1.0;
  w[2].tensor.mutable_value()(0, 0) = 1.6;
  w[2].tensor.mutable_value()(1, 0) = 1.6;
  w[3].tensor.mutable_value()(0, 0) = -0.2;
  w[5].tensor.mutable_value()(0, 0) = 1.0;
  const std::string wall_ckpt = (out / "wall.ckpt").string();
  wall.save(wall_ckpt);
  CHECK(query(wall, testing::v2(2.6, 0.4)).sdf == doctest::Approx(0.8));

  const std::string plan = " plan --checkpoint " + wall_ckpt + " --d-min 0.1 --clearance-margin 0 --start 0.5,1 ";
  CHECK(run_binary("--out " + (out / "ok").string() + plan + "--goal 0.5,2.5 --planner grid") == kExitOk);
  CHECK(run_binary("--out " + (out / "ok").string() + plan + "--goal 0.5,2.5") == kExitOk);
  CHECK(run_binary("--out " + (out / "n").string() + plan + "--goal 2.7,1 --planner grid") == kExitNoPath);
  CHECK(read_json(out / "n" / "path.json")["summary"]["status"] == "no_path");
  CHECK(run_binary("--out " + (out / "n").string() + plan + "--goal 2.7,1") == kExitNoPath);
  CHECK(run_binary("--out " + (out / "x").string() + plan + "--goal 1.6,1 --planner grid") == kExitError);
  CHECK(run_binary("--out " + (out / "x").string() + plan + "--goal 0.5,2.5 --planner astar") == kExitError);

  CHECK(run_binary("--seed 3 --out " + (out / "f").string() +
                   " train --lambda-s 0 --steps 5 --width 16 --layers 1 --embedding-dim 16"
                   " --capture-scene single_disk --capture-spacing 1.0") == kExitOk);
  const json cfg = read_json(out / "f" / "config.json");
  CHECK(cfg["train"]["lambda_s"] == 0.0);
  CHECK(cfg["train"]["steps"] == 5);
  CHECK(cfg["capture"]["scene"] == "single_disk");
  CHECK(cfg["seed"] == 3);
  const std::string log = slurp(out / "f" / "train_log.txt");
  CHECK_FALSE(log.empty());

  const fs::path conf = out / "run.json";
  std::ofstream(conf) << R"({"train": {"steps": 4, "width": 16, "layers": 1, "embedding_dim": 16},
                            "capture": {"scene": "single_disk", "spacing": 1.0}})";
  CHECK(run_binary("--config " + conf.string() + " --out " + (out / "c").string() + " train --steps 3") == kExitOk);
  const json merged = read_json(out / "c" / "config.json");
  CHECK(merged["train"]["steps"] == 3);
  CHECK(merged["train"]["width"] == 16);
}

#include "semnav/cli.hpp"
#include "semnav/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

using nlohmann::json;

namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// JSON when it parses; for array keys a bare comma list is also accepted.
json flag_value(const std::string& text, const json& def) {
  if (def.is_array() && (text.empty() || text.front() != '[')) {
    json arr = json::array();
    std::size_t begin = 0;
    while (begin <= text.size()) {
      const std::size_t end = std::min(text.find(',', begin), text.size());
      const std::string item = text.substr(begin, end - begin);
      if (!item.empty()) arr.push_back(semnav::parse_flag_value(item));
      begin = end + 1;
    }
    return arr;
  }
  if (def.is_string()) return json(text);
  return semnav::parse_flag_value(text);
}

struct KeyFlag {
  std::string command;
  std::string block;
  std::string key;
  CLI::Option* option = nullptr;
  std::string value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic navigation fields: scenes, capture, training, bias analysis, planning, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Global seed");
  app.add_option("--out", out, "Output directory");

  const json defaults = semnav::default_run_config();
  std::map<std::string, CLI::App*> subs;
  std::vector<std::unique_ptr<KeyFlag>> flags;
  for (const auto& name : semnav::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    subs[name] = sub;
    const auto blocks = semnav::command_blocks(name);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      for (const auto& [key, def] : defaults.at(blocks[i]).items()) {
        auto f = std::make_unique<KeyFlag>();
        f->command = name;
        f->block = blocks[i];
        f->key = key;
        const std::string flag = "--" + (i == 0 ? "" : flag_name(blocks[i]) + "-") + flag_name(key);
        f->option = sub->add_option(flag, f->value, blocks[i] + "." + key + " (default " + def.dump() + ")");
        flags.push_back(std::move(f));
      }
    }
  }
  subs["scene"]->description("Write bundled scenes and preview occupancy rasters");
  subs["capture"]->description("Render posed depth and label frames of a scene");
  subs["train"]->description("Train a field on captured frames");
  subs["bias"]->description("Simulate the nearest-point bias and recommend a threshold correction");
  subs["plan"]->description("Plan a path on a trained field (exit 2: no path, 3: infeasible)");
  subs["eval"]->description("Run the length and semantic benchmarks on a scene suite");

  CLI11_PARSE(app, argc, argv);

  try {
    json run = config_path.empty() ? defaults : semnav::load_run_config(config_path);
    json over = json::object();
    if (seed) over["seed"] = *seed;
    if (out) over["out"] = *out;
    std::string command;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) command = name;
    }
    for (const auto& f : flags) {
      if (f->command != command || f->option->count() == 0) continue;
      over[f->block][f->key] = flag_value(f->value, defaults.at(f->block).at(f->key));
    }
    run = semnav::merge_config(run, over);
    return semnav::run_command(command, run, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return semnav::kExitError;
  }
}

// Subcommands of the semnav tool. Each takes a resolved run document (see
// config.hpp), writes its outputs plus config.json (the resolved document)
// and manifest.json under run["out"], and returns the process exit code.
#pragma once

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace semnav {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitNoPath = 2, kExitInfeasible = 3 };

int cmd_scene(const nlohmann::json& run, std::ostream& log);
int cmd_capture(const nlohmann::json& run, std::ostream& log);
int cmd_train(const nlohmann::json& run, std::ostream& log);
int cmd_bias(const nlohmann::json& run, std::ostream& log);
int cmd_plan(const nlohmann::json& run, std::ostream& log);
int cmd_eval(const nlohmann::json& run, std::ostream& log);

int run_command(const std::string& command, const nlohmann::json& run, std::ostream& log);

// Config blocks a subcommand reads. Keys of the first block become bare
// flags (--lambda-s); the others are prefixed with the block name
// (--train-steps).
std::vector<std::string> command_blocks(const std::string& command);
std::vector<std::string> command_names();

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace semnav

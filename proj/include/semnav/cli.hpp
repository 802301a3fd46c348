#pragma once

#include <string>
#include <vector>

namespace semnav {

// Full command-line entry point, callable in-process (tests drive it the
// same way main does). args excludes the program name. Returns the
// process exit code: 0 success, 1 bad input (flags, config, file
// contents), 2 runtime failure.
int run_cli(const std::vector<std::string>& args);

// Scene-set manifest helpers shared by the subcommands. The manifest
// sits next to the scene files and carries the vocabulary they share.
struct SceneSet {
  std::vector<std::string> vocab;
  std::vector<std::string> files;  // relative to the manifest's directory
  uint64_t seed = 0;
};

void save_manifest(const SceneSet& set, const std::string& dir);
SceneSet load_manifest(const std::string& dir);

}  // namespace semnav

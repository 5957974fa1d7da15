#pragma once

// The two exemplary intersection scenarios (plus the follow-up scene of the
// first) as constructed trajectory logs and scene contexts, and their
// emission as a versioned file set with a checksummed manifest.

#include <filesystem>
#include <string>
#include <vector>

#include "scenu/config.hpp"
#include "scenu/derive.hpp"
#include "scenu/dsl.hpp"
#include "scenu/types.hpp"

namespace scenu {

inline constexpr const char* kFixtureVersion = "v1";

std::vector<std::string> fixture_ids();

struct FixtureSource {
  TrajectoryLog log;
  SceneContext scene;
  TaskSpec task;
  std::vector<ActionVerb> expected_verbs;
  std::string notes;
};

// Throws scenu::Error for an unknown id.
FixtureSource fixture_source(const std::string& id);

struct FixtureFile {
  std::string name;
  std::string content;
};

// Generated files in emission order, manifest last. Always built with the
// default configuration so the data set is independent of local overrides.
std::vector<FixtureFile> build_fixture(const std::string& id);

// Writes build_fixture(id) into out_dir (created if missing); returns the paths.
std::vector<std::filesystem::path> emit_fixture(const std::string& id, const std::filesystem::path& out_dir);

// Checks that every file listed in <dir>/manifest.json exists and matches
// its checksum. Returns the problems found (empty when consistent).
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace scenu

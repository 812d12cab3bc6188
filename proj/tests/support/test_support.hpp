#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "schemaprobe/mock_server.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path repo_dir() { return SCHEMAPROBE_REPO_DIR; }
inline fs::path fixture_dir() { return SCHEMAPROBE_FIXTURE_DIR; }
inline fs::path scenario_dir(const std::string& name) { return fixture_dir() / "scenarios" / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "schemaprobe");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(std::string name, const std::string& value);
  ~ScopedEnv();
  ScopedEnv(const ScopedEnv&) = delete;
  ScopedEnv& operator=(const ScopedEnv&) = delete;

 private:
  std::string name_;
  std::optional<std::string> previous_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args, const std::string& stdin_text = {});

// Mock servers for one fixture scenario, with the endpoint and credential
// variables its manifest reads.
class ScenarioServers {
 public:
  explicit ScenarioServers(const std::string& scenario);

  schemaprobe::MockChatServer* target() { return target_.get(); }
  schemaprobe::MockChatServer* judge() { return judge_.get(); }
  schemaprobe::MockChatServer* guard() { return guard_.get(); }
  fs::path manifest() const { return dir_ / "manifest.json"; }

 private:
  fs::path dir_;
  std::unique_ptr<schemaprobe::MockChatServer> target_, judge_, guard_;
  std::vector<std::unique_ptr<ScopedEnv>> env_;
};

std::string slurp(const fs::path& p);

struct PipelineResult {
  int attack_code = -1;
  int judge_code = -1;
  int report_code = -1;
  fs::path store;
  fs::path reports;
  std::string console;  // everything the three commands printed
};

// attack, judge, then report (or ablate) for a fixture scenario against its
// scripted servers, with the store under `work`.
PipelineResult run_pipeline(const std::string& scenario, const fs::path& work, bool ablate = false);

// Golden file comparison; SCHEMAPROBE_UPDATE_GOLDEN=1 rewrites the golden.
bool matches_golden(const fs::path& golden, const std::string& actual);

}  // namespace testsupport

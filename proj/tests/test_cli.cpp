// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int Cli(const fs::path& config, const std::string& args) {
  const std::string cmd = std::string("\"") + BLOCKSPLAT_CLI + "\" -c \"" +
                          config.string() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  oracle::TempDir tmp("cli_usage");
  CHECK(Cli(tmp.path() / "missing.toml", "synth") == 2);
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 2);
  const fs::path cfg = tmp.path() / "c.toml";
  CHECK(Cli(cfg, "") == 2);
  CHECK(Cli(cfg, "frobnicate") == 2);
  CHECK(Cli(cfg, "optimize") == 2);
  CHECK(Cli(cfg, "--set train.nothing=1 synth") == 2);
  CHECK(Cli(cfg, "--set noequals synth") == 2);
  CHECK(Cli(cfg, "optimize --all --workers 0") == 2);
}

TEST_CASE("stages, pose files and block errors") {
  oracle::TempDir tmp("cli_stages");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 2);
  const fs::path cfg = tmp.path() / "c.toml";
  REQUIRE(Cli(cfg, "synth") == 0);
  REQUIRE(Cli(cfg, "partition") == 0);
  CHECK(Cli(cfg, "optimize --block 99") == 2);
  REQUIRE(Cli(cfg, "optimize --all") == 0);
  REQUIRE(Cli(cfg, "merge") == 0);

  std::ofstream(tmp.path() / "empty.txt") << "# no cameras\n";
  CHECK(Cli(cfg, "render --poses \"" + (tmp.path() / "empty.txt").string() +
                     "\"") == 0);
  const fs::path renders = tmp.path() / "out" / "renders";
  const bool none = !fs::exists(renders) || fs::is_empty(renders);
  CHECK(none);

  std::ofstream(tmp.path() / "bad.txt") << "cam 32 32 30\n";
  CHECK(Cli(cfg, "render --poses \"" + (tmp.path() / "bad.txt").string() +
                     "\"") == 2);

  std::ofstream(tmp.path() / "one.txt")
      << "front 32 32 30 30 16 16 1 0 0 0 0 0 4\n";
  CHECK(Cli(cfg, "render --poses \"" + (tmp.path() / "one.txt").string() +
                     "\"") == 0);
  CHECK(fs::exists(tmp.path() / "out" / "renders" / "front.png"));

  REQUIRE(Cli(cfg, "render") == 0);
  REQUIRE(Cli(cfg, "eval") == 0);
  CHECK(fs::exists(tmp.path() / "out" / "eval_report.json"));
}

TEST_CASE("worker count does not change checkpoints") {
  oracle::TempDir tmp("cli_workers");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 20);
  const fs::path cfg = tmp.path() / "c.toml";
  REQUIRE(Cli(cfg, "synth") == 0);
  REQUIRE(Cli(cfg, "partition") == 0);
  const fs::path out = tmp.path() / "out";
  REQUIRE(Cli(cfg, "optimize --all --workers 1") == 0);
  std::vector<std::pair<fs::path, std::string>> first;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.path().extension() == ".ply") first.emplace_back(e.path(), Slurp(e.path()));
  }
  REQUIRE(first.size() >= 4);
  for (const auto& [p, bytes] : first) fs::remove(p);
  REQUIRE(Cli(cfg, "optimize --all --workers 4") == 0);
  for (const auto& [p, bytes] : first) {
    CAPTURE(p.string());
    CHECK(Slurp(p) == bytes);
  }
}

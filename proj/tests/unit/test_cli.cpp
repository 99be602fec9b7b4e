#include <doctest.h>

#include <fstream>

#include "cli.hpp"
#include "pimc/container.hpp"
#include "pimc/manifest.hpp"
#include "tempdir.hpp"

using namespace pimc;
namespace fs = std::filesystem;

namespace {

int pimc_run(std::vector<std::string> args) {
  args.insert(args.begin(), "pimc");
  args.insert(args.begin() + 1, {"--log-level", "error"});
  return cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void make_data(const fs::path& dir) {
  REQUIRE(pimc_run({"synthdata", "--out", dir.string(), "--seed", "4", "--size", "32", "--field", "8",
                    "--train-regions", "2", "--test-regions", "1"}) == cli::kExitOk);
}

}  // namespace

TEST_CASE("synthdata writes a loadable manifest") {
  testing::TempDir dir("cli_synth");
  make_data(dir.path / "d");
  const auto m = load_manifest(dir.path / "d/manifest.json");
  CHECK(m.regions.size() == 3);
  CHECK(m.in_split(Split::Test).size() == 1);
  CHECK(fs::exists(dir.path / "d/synthdata_config.ini"));
}

TEST_CASE("extract is byte identical across runs") {
  testing::TempDir dir("cli_extract");
  make_data(dir.path / "d");
  for (const char* mode : {"hilbert", "random"}) {
    const auto a = dir.path / (std::string("a_") + mode), b = dir.path / (std::string("b_") + mode);
    for (const auto& out : {a, b}) {
      REQUIRE(pimc_run({"extract", "--manifest", (dir.path / "d/manifest.json").string(), "--out", out.string(),
                        "--ps", "8", "--pixels", "4", "--mode", mode, "--seed", "9", "--plot-size", "16"}) ==
              cli::kExitOk);
    }
    for (const char* f : {"extract.json", "series/r000.series", "series/r000.series.json", "plots/r002.rp"}) {
      INFO(f);
      CHECK(slurp(a / f) == slurp(b / f));
    }
  }
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli_exit");
  CHECK(pimc_run({}) == cli::kExitUsage);
  CHECK(pimc_run({"train", "--bogus"}) == cli::kExitUsage);
  CHECK(pimc_run({"extract", "--manifest", "/nonexistent.json", "--out", dir.path.string()}) == cli::kExitUsage);
  make_data(dir.path / "d");
  CHECK(pimc_run({"extract", "--manifest", (dir.path / "d/manifest.json").string(), "--out",
                  (dir.path / "x").string(), "--mode", "zigzag"}) == cli::kExitUsage);
  CHECK(pimc_run({"extract", "--manifest", (dir.path / "d/manifest.json").string(), "--out",
                  (dir.path / "x").string(), "--ps", "64"}) == cli::kExitUsage);
  REQUIRE(pimc_run({"extract", "--manifest", (dir.path / "d/manifest.json").string(), "--out",
                    (dir.path / "x").string(), "--ps", "8", "--pixels", "4", "--plot-size", "16"}) == cli::kExitOk);
  CHECK(pimc_run({"eval", "--task", "pixel-cls", "--checkpoint", (dir.path / "none").string(), "--data",
                  (dir.path / "x").string(), "--out", (dir.path / "e").string()}) == cli::kExitData);
  CHECK(pimc_run({"train", "--data", (dir.path / "nowhere").string(), "--out", (dir.path / "t").string()}) ==
        cli::kExitData);
  // corrupt manifest
  std::ofstream(dir.path / "bad.json") << "not json";
  CHECK(pimc_run({"extract", "--manifest", (dir.path / "bad.json").string(), "--out", (dir.path / "y").string()}) ==
        cli::kExitData);
}

TEST_CASE("config file values yield to flags") {
  testing::TempDir dir("cli_config");
  make_data(dir.path / "d");
  REQUIRE(pimc_run({"extract", "--manifest", (dir.path / "d/manifest.json").string(), "--out",
                    (dir.path / "x").string(), "--ps", "8", "--pixels", "4", "--plot-size", "16"}) == cli::kExitOk);
  std::ofstream(dir.path / "run.ini") << "epochs = 1\nbatch = 4\nwidths = 4,8\nembed-dim = 8\nblocks = 1\n"
                                         "plot-size = 16\nseed = 11\n";
  REQUIRE(pimc_run({"train", "--config", (dir.path / "run.ini").string(), "--data", (dir.path / "x").string(),
                    "--out", (dir.path / "t").string(), "--batch", "8"}) == cli::kExitOk);
  const auto resolved = slurp(dir.path / "t/train_config.ini");
  CHECK(resolved.find("batch=8") != std::string::npos);
  CHECK(resolved.find("epochs=1") != std::string::npos);
  CHECK(resolved.find("seed=11") != std::string::npos);
  CHECK(fs::exists(dir.path / "t/loss.csv"));
  CHECK(fs::exists(dir.path / "t/summary.json"));

  std::ofstream(dir.path / "typo.ini") << "epoch = 1\n";
  CHECK(pimc_run({"train", "--config", (dir.path / "typo.ini").string(), "--data", (dir.path / "x").string(),
                  "--out", (dir.path / "t2").string()}) == cli::kExitData);
}

// Exercises the installed command-line surface through the real binary.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "breathscope/pipeline.hpp"

namespace bs = breathscope;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("bs_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(BREATHSCOPE_CLI_PATH) + " " + args +
                    " > /dev/null 2> /dev/null";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("missing calibration file exits with code 2") {
  fs::path dir = temp_dir("missing_calib");
  bs::ChestModel model;
  bs::write_synthetic_dataset(model, 64, 48, 4.0, 1.0, 0.0, 1, dir);
  int rc = run_cli("analyze --input " + dir.string() + " --calib " +
                   (dir / "nope.txt").string() + " --out " +
                   (dir / "out").string());
  CHECK(rc == 2);
}

TEST_CASE("export-ply with an out-of-range frame exits with code 3") {
  fs::path dir = temp_dir("ply_range");
  bs::ChestModel model;
  bs::write_synthetic_dataset(model, 64, 48, 4.0, 1.0, 0.0, 1, dir);
  int rc = run_cli("export-ply --input " + dir.string() + " --calib " +
                   (dir / "calib.txt").string() + " --config " +
                   (dir / "config.txt").string() + " --frame 99 --out " +
                   (dir / "f.ply").string());
  CHECK(rc == 3);
}

TEST_CASE("export-ply writes a parseable cloud for a valid frame") {
  fs::path dir = temp_dir("ply_ok");
  bs::ChestModel model;
  bs::write_synthetic_dataset(model, 128, 96, 4.0, 1.0, 0.0, 1, dir);
  int rc = run_cli("export-ply --input " + dir.string() + " --calib " +
                   (dir / "calib.txt").string() + " --config " +
                   (dir / "config.txt").string() + " --frame 2 --out " +
                   (dir / "f.ply").string());
  CHECK(rc == 0);
  std::string text = slurp(dir / "f.ply");
  CHECK(text.find("format ascii 1.0") != std::string::npos);
  CHECK(text.find("element vertex") != std::string::npos);
}

TEST_CASE("synth with the same seed reproduces the dataset bitwise") {
  fs::path a = temp_dir("seed_a");
  fs::path b = temp_dir("seed_b");
  for (const fs::path& dir : {a, b}) {
    int rc = run_cli("synth shallow --out " + dir.string() +
                     " --seed 7 --fps 6 --duration 2 --width 64 --height 48");
    REQUIRE(rc == 0);
  }
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    fs::path other = b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared > 12);  // frames + manifest + calib + truth + config + scenario
}

TEST_CASE("unknown scenario is reported as a parameter failure") {
  fs::path dir = temp_dir("bad_scenario");
  int rc = run_cli("synth sideways --out " + dir.string());
  CHECK(rc == 1);
}

TEST_CASE("analyze --export-ply writes the frame cloud next to the report") {
  fs::path dir = temp_dir("analyze_ply");
  bs::ChestModel model;
  bs::write_synthetic_dataset(model, 128, 96, 6.0, 4.0, 0.0, 2, dir);
  int rc = run_cli("analyze --input " + dir.string() + " --calib " +
                   (dir / "calib.txt").string() + " --config " +
                   (dir / "config.txt").string() + " --out " +
                   (dir / "out").string() + " --export-ply 3");
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "out" / "frame_3.ply"));
  CHECK(fs::exists(dir / "out" / "report.json"));
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dnirb/checkpoint.hpp"
#include "dnirb/dataset.hpp"
#include "dnirb/image.hpp"

namespace dnirb {
namespace {

namespace fs = std::filesystem;

struct ToolResult {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "dnirb_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream list(dir_ / "images.txt");
    for (int i = 0; i < 3; ++i) {
      const std::string name = "img" + std::to_string(i) + ".pgm";
      save_image(synth_thermal_scene(64, 48, 40 + i), dir_ / name);
      list << name << "\n";
    }
    std::ofstream(dir_ / "one.txt") << "img0.pgm\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // Runs the tool inside the test directory with stderr folded into stdout.
  static ToolResult dnirb(const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" DNIRB_TOOL "' " + args + " 2>&1";
    ToolResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }
  static fs::path path(const std::string& name) { return dir_ / name; }
  static inline fs::path dir_;
};

TEST_F(CliTest, AddNoiseIsDeterministicPerSeed) {
  ASSERT_EQ(dnirb("add-noise --in img0.pgm --out a.pgm --model laplace --scale 12.5 --seed 7").code, 0);
  ASSERT_EQ(dnirb("add-noise --in img0.pgm --out b.pgm --model laplace --scale 12.5 --seed 7").code, 0);
  ASSERT_EQ(dnirb("add-noise --in img0.pgm --out c.pgm --model laplace --scale 12.5 --seed 8").code, 0);
  EXPECT_EQ(slurp(path("a.pgm")), slurp(path("b.pgm")));
  EXPECT_NE(slurp(path("a.pgm")), slurp(path("img0.pgm")));
  EXPECT_NE(slurp(path("a.pgm")), slurp(path("c.pgm")));
  EXPECT_TRUE(fs::exists(path("a.pgm.manifest")));
}

TEST_F(CliTest, AddNoiseReportsNoisyPsnr) {
  const ToolResult r = dnirb("add-noise --in img1.pgm --out l25.pgm --scale 25 --seed 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto at = r.out.find("noisy PSNR ");
  ASSERT_NE(at, std::string::npos) << r.out;
  const double db = std::stod(r.out.substr(at + 11));
  EXPECT_NEAR(db, 17.16, 0.6);
}

TEST_F(CliTest, AddNoiseRejectsZeroScale) {
  const ToolResult r = dnirb("add-noise --in img0.pgm --out z.pgm --scale 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("out of range"), std::string::npos) << r.out;
}

TEST_F(CliTest, UnknownFlagAndMissingRequiredFailWithUsage) {
  ToolResult r = dnirb("add-noise --in img0.pgm --out z.pgm --scale 1 --colour");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
  r = dnirb("train --data images.txt --scale 5 --out m.ckpt");  // no --blocks
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--blocks"), std::string::npos);
  EXPECT_EQ(dnirb("train --data images.txt --blocks 0 --scale 5 --out m.ckpt").code, 2);
}

TEST_F(CliTest, BadImageIsDataError) {
  std::ofstream(path("junk.pgm")) << "not an image";
  const ToolResult r = dnirb("add-noise --in junk.pgm --out j.pgm --scale 3");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("junk.pgm"), std::string::npos) << r.out;
}

TEST_F(CliTest, TinyTrainingRunLearnsAndIsReproducible) {
  const std::string flags =
      "train --data one.txt --blocks 1 --scale 12.5 --steps 200 --batch-size 4 --log-interval 50 "
      "--augment dihedral --seed 3 --quiet";
  const ToolResult a = dnirb(flags + " --out t1.ckpt");
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(dnirb(flags + " --out t2.ckpt").code, 0);
  EXPECT_EQ(slurp(path("t1.ckpt")), slurp(path("t2.ckpt")));
  EXPECT_EQ(read_checkpoint_info(path("t1.ckpt")).checksum,
            read_checkpoint_info(path("t2.ckpt")).checksum);

  std::ifstream csv(path("t1.ckpt.train.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "step,loss,val_psnr,ms_per_step");
  std::vector<double> losses;
  while (std::getline(csv, line)) losses.push_back(std::stod(line.substr(line.find(',') + 1)));
  ASSERT_EQ(losses.size(), 4u);
  EXPECT_LT(losses.back(), losses.front());
}

TEST_F(CliTest, RerunReproducesOutputs) {
  ASSERT_EQ(dnirb("train --data one.txt --blocks 1 --scale 5 --steps 3 --batch-size 2 --augment none "
                  "--seed 4 --quiet --out r.ckpt")
                .code,
            0);
  const std::string first = slurp(path("r.ckpt"));
  fs::remove(path("r.ckpt"));
  const ToolResult r = dnirb("rerun --manifest r.ckpt.manifest");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(path("r.ckpt")), first);
}

TEST_F(CliTest, ConfigFileSitsBetweenFlagsAndDefaults) {
  std::ofstream(path("cfg.txt")) << "# shared settings\nsteps = 4\nbatch-size=2\nlog-interval=1\n";
  ASSERT_EQ(dnirb("train --data one.txt --blocks 1 --scale 5 --augment none --config cfg.txt --steps 2 "
                  "--quiet --out p.ckpt")
                .code,
            0);
  const std::string m = slurp(path("p.ckpt.manifest"));
  EXPECT_NE(m.find("\nsteps=2\n"), std::string::npos) << m;       // flag wins
  EXPECT_NE(m.find("\nbatch-size=2\n"), std::string::npos) << m;  // file beats default
  EXPECT_NE(m.find("\nlr=0.001\n"), std::string::npos) << m;      // default expanded
  std::ofstream(path("bad.txt")) << "stepz=4\n";
  EXPECT_EQ(dnirb("train --data one.txt --blocks 1 --scale 5 --config bad.txt --out p.ckpt").code, 2);
}

TEST_F(CliTest, ThreadsDefaultFromEnvironment) {
  ASSERT_EQ(dnirb("train --data one.txt --blocks 1 --scale 5 --steps 1 --batch-size 2 --augment none "
                  "--quiet --out e.ckpt",
                  "DNIRB_THREADS=2")
                .code,
            0);
  EXPECT_NE(slurp(path("e.ckpt.manifest")).find("\nthreads=2\n"), std::string::npos);
  EXPECT_EQ(dnirb("gradcheck --seeds 1", "DNIRB_THREADS=zero").code, 2);
}

TEST_F(CliTest, NanAbortExitsWithNumericCode) {
  const ToolResult r = dnirb("train --data one.txt --blocks 1 --scale 5 --steps 50 --batch-size 2 --augment none "
                      "--optimizer sgd --lr 1e300 --checkpoint-interval 1 --quiet --out nan.ckpt");
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("step"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("nan.ckpt")));
  EXPECT_FALSE(fs::exists(path("nan.ckpt.partial")));
}

TEST_F(CliTest, ZeroCheckpointDenoiseIsIdentity) {
  ASSERT_EQ(dnirb("init --blocks 2 --zero --out zero.ckpt").code, 0);
  ASSERT_EQ(dnirb("add-noise --in img2.pgm --out n2.pgm --scale 7.5").code, 0);
  ASSERT_EQ(dnirb("denoise --checkpoint zero.ckpt --in n2.pgm --out d2.pgm").code, 0);
  EXPECT_EQ(slurp(path("n2.pgm")), slurp(path("d2.pgm")));
}

TEST_F(CliTest, CheckpointMismatchAndCorruption) {
  ASSERT_EQ(dnirb("init --blocks 2 --out two.ckpt").code, 0);
  EXPECT_EQ(dnirb("denoise --checkpoint two.ckpt --in img0.pgm --out x.pgm --blocks 4").code, 5);
  std::string bytes = slurp(path("two.ckpt"));
  bytes[bytes.size() - 20] ^= 0x40;
  std::ofstream(path("bad.ckpt"), std::ios::binary) << bytes;
  const ToolResult r = dnirb("denoise --checkpoint bad.ckpt --in img0.pgm --out x.pgm");
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.out.find("checksum"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalLaplaceSweepHasOneRowPerScale) {
  ASSERT_EQ(dnirb("init --blocks 1 --zero --out ev.ckpt").code, 0);
  const ToolResult r = dnirb("eval --checkpoint ev.ckpt --data images.txt --sweep laplace --seed 2 --out ev.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream csv(path("ev.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "noise_model,scale,noisy_psnr,denoised_psnr");
  std::vector<std::string> scales;
  while (std::getline(csv, line)) {
    const auto a = line.find(',') + 1;
    scales.push_back(line.substr(a, line.find(',', a) - a));
  }
  EXPECT_EQ(scales, (std::vector<std::string>{"5", "7.5", "12.5", "25"}));
  const std::string first = slurp(path("ev.csv"));
  ASSERT_EQ(dnirb("rerun --manifest ev.csv.manifest").code, 0);
  EXPECT_EQ(slurp(path("ev.csv")), first);
}

TEST_F(CliTest, EvalBlockSweepAndTriplets) {
  ASSERT_EQ(dnirb("init --blocks 1 --out b1.ckpt").code, 0);
  ASSERT_EQ(dnirb("init --blocks 2 --out b2.ckpt").code, 0);
  const ToolResult r = dnirb("eval --checkpoint b1.ckpt b2.ckpt --data one.txt --sweep blocks --out blocks.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(slurp(path("blocks.csv")).find("blocks,noisy_psnr,psnr,seconds"), std::string::npos);
  ASSERT_EQ(dnirb("eval --checkpoint b1.ckpt --data one.txt --sweep gaussian --scales 10 --triplets trip "
                  "--out g.csv")
                .code,
            0);
  EXPECT_TRUE(fs::exists(path("trip/img0_gaussian10_residual.pgm")));
}

TEST_F(CliTest, GradcheckPasses) {
  const ToolResult r = dnirb("gradcheck --seeds 2 --out gc.csv");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(path("gc.csv.manifest")));
}

TEST_F(CliTest, HistogramPrefersLaplaceOnLaplaceNoise) {
  ASSERT_EQ(dnirb("add-noise --in img0.pgm --out h.pgm --scale 10 --seed 5").code, 0);
  const ToolResult r = dnirb("histogram --in h.pgm --out h.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("better fit: laplace"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace dnirb

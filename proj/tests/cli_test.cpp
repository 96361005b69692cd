// Copyright 2026 The lintx Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lintx/pipeline.hpp"
#include "lintx/trainer.hpp"

namespace lintx {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lintx_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(LINTX_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  // Seeded (untrained) shallow weights and two square images.
  void make_inputs(bool with_transform = false, std::size_t side = 16) {
    const ModelSpec spec = ModelSpec::preset(Depth::shallow);
    WeightStore w = init_encoder_weights(spec.encoder, 1);
    w.merge(init_decoder_weights(spec.encoder, 2));
    if (with_transform) w.merge(init_transform_weights(spec.transform, 3));
    w.spec_hash = spec.hash();
    save_weights(w, p("w.lstw"));
    Rng rng(4);
    write_image(make_content_image(side, rng), p("c.ppm"));
    write_image(make_style_image(side, rng), p("s.ppm"));
  }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  std::string stylize_args() const {
    return "stylize --content " + p("c.ppm") + " --style " + p("s.ppm") + " --weights " + p("w.lstw");
  }

  fs::path dir_;
};

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

TEST_F(CliTest, VerifyPassesAndPrintsCheckLines) {
  const CliRun r = run("verify");
  EXPECT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.rfind("CHECK ", 0), 0u) << line;
    EXPECT_TRUE(line.ends_with(" PASS")) << line;
    ++n;
  }
  EXPECT_GE(n, 5);
}

TEST_F(CliTest, SabotagedTransformFailsVerify) {
  const CliRun r = run("verify --sabotage identityT");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("CHECK covariance_match "), std::string::npos);
  EXPECT_NE(r.out.find(" FAIL"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("verify --bogus").code, 2);
  EXPECT_EQ(run("verify --sabotage other").code, 2);
  EXPECT_EQ(run("stylize --kind sharp").code, 2);
  EXPECT_EQ(run("stylize --alpha 1.5").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, MissingFilesExitThreeWithOneLine) {
  make_inputs();
  const CliRun r = run("stylize --content " + p("nope.ppm") + " --style " + p("s.ppm") + " --weights " +
                    p("w.lstw") + " --out " + p("o.ppm"));
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
  EXPECT_NE(r.err.find("nope.ppm"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("o.ppm")));
}

TEST_F(CliTest, MissingRequiredFlagExitsTwo) {
  make_inputs();
  const CliRun r = run(stylize_args());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--out"), std::string::npos);
}

TEST_F(CliTest, BadImageAndBadWeightsExitThree) {
  make_inputs();
  std::ofstream(p("p3.ppm")) << "P3\n1 1\n255\n0 0 0\n";
  const CliRun img = run("stylize --content " + p("p3.ppm") + " --style " + p("s.ppm") + " --weights " +
                      p("w.lstw") + " --out " + p("o.ppm"));
  EXPECT_EQ(img.code, 3);
  EXPECT_NE(img.err.find("unsupported PPM variant"), std::string::npos);

  std::string bytes = slurp(p("w.lstw"));
  bytes[bytes.size() / 2] ^= 0x40;
  std::ofstream(p("bad.lstw"), std::ios::binary) << bytes;
  const CliRun w = run("stylize --content " + p("c.ppm") + " --style " + p("s.ppm") + " --weights " +
                    p("bad.lstw") + " --out " + p("o.ppm"));
  EXPECT_EQ(w.code, 3);
  EXPECT_NE(w.err.find("checksum"), std::string::npos);
}

TEST_F(CliTest, WeightsForOtherDepthRejected) {
  make_inputs();
  const CliRun r = run(stylize_args() + " --depth deep --out " + p("o.ppm"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--depth deep"), std::string::npos);
}

TEST_F(CliTest, LearnedKindNeedsTransformWeights) {
  make_inputs();
  EXPECT_EQ(run(stylize_args() + " --kind learned --out " + p("o.ppm")).code, 2);
}

TEST_F(CliTest, StylizeWritesImageAndReport) {
  make_inputs();
  const CliRun r = run(stylize_args() + " --out " + p("o.ppm") + " --report");
  ASSERT_EQ(r.code, 0) << r.err;
  const Tensor out = read_image(p("o.ppm"));
  EXPECT_EQ(out.shape(), (Shape{3, 16, 16}));
  double cov = 1.0, aff = 1.0;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "covariance_residual %lf\naffinity_residual %lf", &cov, &aff), 2)
      << r.out;
  // Seeded encoders leave channels dead, so only well-formedness is checked here.
  EXPECT_TRUE(std::isfinite(cov) && cov >= 0.0);
  EXPECT_TRUE(std::isfinite(aff) && aff >= 0.0);

  // Same bytes as the library call.
  const ModelSpec spec = ModelSpec::preset(Depth::shallow);
  const Stylized lib =
      stylize_image(read_image(p("c.ppm")), read_image(p("s.ppm")), spec, load_weights(p("w.lstw")), {});
  EXPECT_EQ(encode_ppm(lib.image), encode_ppm(out));
}

TEST_F(CliTest, AllKindsRun) {
  make_inputs(true);
  for (const char* kind : {"closed_form", "adain", "learned"}) {
    const CliRun r = run(stylize_args() + " --kind " + kind + " --out " + p(std::string(kind) + ".ppm"));
    EXPECT_EQ(r.code, 0) << kind << ": " << r.err;
  }
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  make_inputs();
  ASSERT_EQ(run(stylize_args() + " --alpha 0 --out " + p("zero.ppm")).code, 0);
  ASSERT_EQ(run(stylize_args() + " --out " + p("one.ppm")).code, 0);
  std::ofstream(p("cfg.ini")) << "alpha = 0\n";
  ASSERT_EQ(run(stylize_args() + " --config " + p("cfg.ini") + " --out " + p("cfg.ppm")).code, 0);
  ASSERT_EQ(run(stylize_args() + " --config " + p("cfg.ini") + " --alpha 1 --out " + p("flag.ppm")).code, 0);
  EXPECT_EQ(slurp(p("cfg.ppm")), slurp(p("zero.ppm")));
  EXPECT_EQ(slurp(p("flag.ppm")), slurp(p("one.ppm")));
  EXPECT_NE(slurp(p("zero.ppm")), slurp(p("one.ppm")));
}

TEST_F(CliTest, MaskSizeMismatchExitsTwo) {
  make_inputs();
  write_mask({8, 8, std::vector<std::uint32_t>(64, 0), 1}, p("m.pgm"));
  const CliRun r = run(stylize_args() + " --mask " + p("m.pgm") + " --out " + p("o.ppm"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("mask"), std::string::npos);
}

TEST_F(CliTest, MaskedStylizeRuns) {
  make_inputs();
  RegionMask m{16, 16, std::vector<std::uint32_t>(256, 0), 2};
  for (std::size_t i = 128; i < 256; ++i) m.labels[i] = 1;
  write_mask(m, p("m.pgm"));
  write_mask(m, p("sm.pgm"));
  const CliRun r = run(stylize_args() + " --mask " + p("m.pgm") + " --style-mask " + p("sm.pgm") + " --out " +
                    p("o.ppm"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run(stylize_args() + " --mask " + p("m.pgm") + " --kind adain --out " + p("o.ppm")).code, 2);
}

TEST_F(CliTest, VideoMatchesPerFrameStylize) {
  make_inputs();
  fs::create_directories(dir_ / "frames");
  Rng rng(9);
  for (int i = 0; i < 3; ++i)
    write_image(make_content_image(16, rng), dir_ / "frames" / ("f" + std::to_string(i) + ".ppm"));
  const CliRun r = run("stylize-video --content " + p("frames") + " --style " + p("s.ppm") + " --weights " +
                    p("w.lstw") + " --out " + p("video"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "f" + std::to_string(i) + ".ppm";
    ASSERT_EQ(run("stylize --content " + p("frames/" + name) + " --style " + p("s.ppm") + " --weights " +
                  p("w.lstw") + " --out " + p("single.ppm"))
                  .code,
              0);
    EXPECT_EQ(slurp(p("video/" + name)), slurp(p("single.ppm"))) << name;
  }
}

TEST_F(CliTest, VideoRejectsMixedFrameSizes) {
  make_inputs();
  fs::create_directories(dir_ / "frames");
  Rng rng(9);
  write_image(make_content_image(16, rng), dir_ / "frames" / "a.ppm");
  write_image(make_content_image(8, rng), dir_ / "frames" / "b.ppm");
  const CliRun r = run("stylize-video --content " + p("frames") + " --style " + p("s.ppm") + " --weights " +
                    p("w.lstw") + " --out " + p("video"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("b.ppm"), std::string::npos);
}

TEST_F(CliTest, BenchPrintsCsv) {
  const CliRun r = run("bench --sizes 8,16 --runs 20");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("NOT comparable"), std::string::npos);
  EXPECT_NE(r.out.find("kind,size,channels,median_ms,runs\n"), std::string::npos);
  for (const char* row : {"closed_form,8,", "closed_form,16,", "adain,8,", "adain,16,", "learned,8,", "learned,16,"})
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  EXPECT_EQ(run("bench --sizes 10").code, 2);
  EXPECT_EQ(run("bench --runs 5").code, 2);
}

TEST_F(CliTest, TrainingCommandsWriteWeightsAndHistory) {
  const CliRun d = run("train-decoder --steps 2 --out " + p("dec.lstw"));
  ASSERT_EQ(d.code, 0) << d.err;
  const WeightStore dec = load_weights(p("dec.lstw"));
  EXPECT_EQ(dec.spec_hash, ModelSpec::preset(Depth::shallow).hash());
  EXPECT_EQ(slurp(p("dec.lstw.loss.csv")).rfind("step,content_loss,style_loss,total\n", 0), 0u);

  const CliRun t = run("train-transform --steps 2 --weights " + p("dec.lstw") + " --out " + p("full.lstw"));
  ASSERT_EQ(t.code, 0) << t.err;
  const WeightStore full = load_weights(p("full.lstw"));
  EXPECT_TRUE(full.contains("transform.compress.weight"));
  for (const auto& [name, value] : dec.entries()) EXPECT_EQ(full.get(name), value) << name;
  EXPECT_EQ(count_lines(slurp(p("full.lstw.loss.csv"))), 3);
}

TEST_F(CliTest, SelfTransferReportsMatchedCovariance) {
  make_inputs(false, 32);
  const CliRun r = run("stylize --content " + p("c.ppm") + " --style " + p("c.ppm") + " --weights " +
                       p("w.lstw") + " --out " + p("o.ppm") + " --report");
  ASSERT_EQ(r.code, 0) << r.err;
  double cov = 1.0;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "covariance_residual %lf", &cov), 1) << r.out;
  EXPECT_LT(cov, 1e-6);
}

TEST_F(CliTest, AlphaZeroIsPureReconstruction) {
  make_inputs();
  ASSERT_EQ(run(stylize_args() + " --alpha 0 --out " + p("o.ppm")).code, 0);
  const ModelSpec spec = ModelSpec::preset(Depth::shallow);
  const WeightStore w = load_weights(p("w.lstw"));
  const Tensor recon = decode(encode(read_image(p("c.ppm")), spec.encoder, w).bottleneck, spec.encoder, w);
  const std::vector<std::uint8_t> bytes = encode_ppm(recon);
  EXPECT_EQ(slurp(p("o.ppm")), std::string(bytes.begin(), bytes.end()));
}

TEST_F(CliTest, LearnedOutputIsDeterministic) {
  make_inputs(true, 64);
  ASSERT_EQ(run(stylize_args() + " --kind learned --out " + p("a.ppm")).code, 0);
  ASSERT_EQ(run(stylize_args() + " --kind learned --out " + p("b.ppm")).code, 0);
  EXPECT_EQ(slurp(p("a.ppm")), slurp(p("b.ppm")));
}

TEST_F(CliTest, SingleFrameVideoMatchesStylize) {
  make_inputs();
  fs::create_directories(dir_ / "frames");
  fs::copy_file(p("c.ppm"), dir_ / "frames" / "f.ppm");
  ASSERT_EQ(run("stylize-video --content " + p("frames") + " --style " + p("s.ppm") + " --weights " +
                p("w.lstw") + " --out " + p("video"))
                .code,
            0);
  ASSERT_EQ(run(stylize_args() + " --out " + p("single.ppm")).code, 0);
  EXPECT_EQ(slurp(p("video/f.ppm")), slurp(p("single.ppm")));
}

TEST_F(CliTest, IdenticalFramesGiveIdenticalOutputs) {
  make_inputs(true);
  fs::create_directories(dir_ / "frames");
  for (int i = 0; i < 5; ++i) fs::copy_file(p("c.ppm"), dir_ / "frames" / ("f" + std::to_string(i) + ".ppm"));
  for (const char* kind : {"closed_form", "adain", "learned"}) {
    const fs::path out = dir_ / (std::string("video_") + kind);
    ASSERT_EQ(run("stylize-video --content " + p("frames") + " --style " + p("s.ppm") + " --weights " +
                  p("w.lstw") + " --kind " + kind + " --out " + out.string())
                  .code,
              0);
    for (int i = 1; i < 5; ++i)
      EXPECT_EQ(slurp(out / ("f" + std::to_string(i) + ".ppm")), slurp(out / "f0.ppm")) << kind;
  }
}

std::map<std::string, double> bench_cells(const std::string& csv) {
  std::map<std::string, double> cells;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) {
    char kind[32];
    std::size_t size = 0, channels = 0, runs = 0;
    double ms = 0.0;
    if (std::sscanf(line.c_str(), "%31[^,],%zu,%zu,%lf,%zu", kind, &size, &channels, &ms, &runs) == 5)
      cells[std::string(kind) + "@" + std::to_string(size)] = ms;
  }
  return cells;
}

TEST_F(CliTest, SmallBenchIsFastAndStable) {
  const auto t0 = std::chrono::steady_clock::now();
  const CliRun a = run("bench --sizes 32");
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
  const CliRun b = run("bench --sizes 32");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  const auto ca = bench_cells(a.out), cb = bench_cells(b.out);
  ASSERT_EQ(ca.size(), 3u);
  for (const auto& [cell, ms] : ca) {
    ASSERT_TRUE(cb.contains(cell));
    EXPECT_LT(std::abs(ms - cb.at(cell)), 0.5 * std::max(ms, cb.at(cell))) << cell;
  }
}

}  // namespace
}  // namespace lintx

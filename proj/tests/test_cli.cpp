#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "irncc/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "irncc");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = irncc::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  Outcome r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("datagen"), std::string::npos);
  for (const char* sub : {"datagen", "train", "export-filter", "fit-hat", "detect", "bench", "roc"}) {
    r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "--data"}).code, 2);
  EXPECT_EQ(run({"train", "--data", "x", "--out", "y", "--norm", "l2"}).code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const Outcome r = run({"train", "--data", "/nonexistent/irncc.nccd", "--out", "/tmp/irncc_never.txt"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_EQ(run({"detect", "--frame", "/nonexistent.pgm", "--method", "gauss-1.2"}).code, 1);
}

TEST(Cli, SmallPipeline) {
  const fs::path dir = fs::temp_directory_path() / "irncc_cli_test";
  fs::remove_all(dir);
  const std::string d = (dir / "data").string();
  ASSERT_EQ(run({"datagen", "--out", d, "--scenes", "4", "--frames-per-scene", "1", "--width", "96", "--height",
                 "96", "--targets", "3", "--negatives", "60", "--bench-frames", "3", "--bench-targets", "2",
                 "--seed", "3"})
                .code,
            0);
  ASSERT_TRUE(fs::exists(dir / "data" / "dataset.nccd"));
  ASSERT_TRUE(fs::exists(dir / "data" / "bench" / "truths.csv"));
  const std::string net = (dir / "net.txt").string();
  ASSERT_EQ(run({"train", "--data", d, "--out", net, "--epochs", "2", "--history", (dir / "h.csv").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "h.csv").substr(0, 6), "epoch,");
  const std::string filt = (dir / "f.txt").string(), hat = (dir / "hat.txt").string();
  ASSERT_EQ(run({"export-filter", "--net", net, "--out", filt}).code, 0);
  EXPECT_EQ(run({"export-filter", "--net", net, "--index", "3", "--out", filt}).code, 1);
  ASSERT_EQ(run({"fit-hat", "--filter", filt, "--out", hat}).code, 0);
  const std::string out = (dir / "bench").string();
  ASSERT_EQ(run({"bench", "--data", d, "--methods", "hat9-ideal,mad-ratio,filter:" + filt + ",net:" + net, "--out-dir",
                 out, "--hat", hat, "--no-timing"})
                .code,
            0);
  for (const char* f : {"roc.csv", "auc.csv", "scores.csv", "score_range.csv"}) EXPECT_TRUE(fs::exists(dir / "bench" / f));
  const std::string roc2 = (dir / "roc2.csv").string();
  ASSERT_EQ(run({"roc", "--scores", (dir / "bench" / "scores.csv").string(), "--data", d, "--out", roc2}).code, 0);
  EXPECT_EQ(slurp(roc2), slurp(dir / "bench" / "roc.csv"));
  const Outcome det = run({"detect", "--frame", (dir / "data" / "bench" / "frames" / "frame_0000.pgm").string(), "--method",
                       "hat7-fixed-mad", "--threshold", "0.4"});
  EXPECT_EQ(det.code, 0);
  EXPECT_EQ(det.out.substr(0, 14), "row,col,score\n");
  EXPECT_EQ(run({"opcount", "--size", "256"}).code, 0);
  fs::remove_all(dir);
}

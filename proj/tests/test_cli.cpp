#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "entcat_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(ENTCAT_CLI_PATH) + " " + args + " > " + at("last_stdout.txt") + " 2> " +
                          at("last_stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& path) {
  const auto text = slurp(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Gen, WritesRowsAndIsByteStable) {
  ASSERT_EQ(run("gen --dim 4 --n 10000 --seed 7 --out " + at("d4.csv")), 0);
  EXPECT_EQ(lines(at("d4.csv")), 10001u);
  ASSERT_EQ(run("gen --dim 4 --n 10000 --seed 7 --jobs 3 --out " + at("d4b.csv")), 0);
  EXPECT_EQ(slurp(at("d4.csv")), slurp(at("d4b.csv")));
  EXPECT_EQ(slurp(at("d4.csv")).substr(0, 24), "dim=4;mode=paired;seed=7");
}

TEST(Gen, AllPairsMode) {
  ASSERT_EQ(run("gen --dim 3 --n 12 --mode all_pairs --out " + at("ap.csv")), 0);
  EXPECT_EQ(lines(at("ap.csv")), 145u);
}

TEST(Gen, BadArguments) {
  EXPECT_EQ(run("gen --dim 4 --n 0 --out " + at("zero.csv")), 2);
  EXPECT_EQ(run("gen --dim 1 --n 5 --out " + at("d1.csv")), 2);
  EXPECT_EQ(run("gen --dim 4 --n 5 --mode sideways --out " + at("x.csv")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Gen, UnwritableOutputIsIoError) {
  EXPECT_EQ(run("gen --dim 3 --n 5 --out /nonexistent-dir/x.csv"), 3);
}

TEST(Gen, RelativeOutputUsesEnvironmentDirectory) {
  const std::string dir = at("envout");
  const std::string cmd = "ENTCAT_OUT_DIR=" + dir + " " + std::string(ENTCAT_CLI_PATH) +
                          " gen --dim 3 --n 5 --out rel.csv > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "rel.csv"));
}

TEST(Train, HistoryAndCheckpoint) {
  ASSERT_EQ(run("gen --dim 3 --n 300 --seed 2 --out " + at("t3.csv")), 0);
  ASSERT_EQ(run("train --data " + at("t3.csv") + " --epochs 4 --out " + at("m3.json")), 0);
  EXPECT_EQ(lines(at("m3.json.history.csv")), 5u);
  const auto ck = nlohmann::json::parse(slurp(at("m3.json")));
  EXPECT_EQ(ck["optimizer"]["kind"], "adam");
  EXPECT_EQ(ck["train"]["epochs"], 4);
}

TEST(Train, SgdSelectedByFlag) {
  ASSERT_EQ(run("gen --dim 3 --n 200 --out " + at("s3.csv")), 0);
  ASSERT_EQ(run("train --data " + at("s3.csv") + " --optimizer sgd --epochs 2 --history " + at("sgd_hist.csv") +
                " --out " + at("sgd.json")),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(at("sgd.json")))["optimizer"]["kind"], "sgd");
  EXPECT_EQ(lines(at("sgd_hist.csv")), 3u);
  EXPECT_EQ(run("train --data " + at("s3.csv") + " --optimizer lbfgs --out " + at("bad.json")), 2);
}

TEST(Train, SameFlagsSameCheckpoint) {
  ASSERT_EQ(run("gen --dim 3 --n 200 --seed 4 --out " + at("r3.csv")), 0);
  ASSERT_EQ(run("train --data " + at("r3.csv") + " --epochs 2 --seed 3 --out " + at("r1.json")), 0);
  ASSERT_EQ(run("train --data " + at("r3.csv") + " --epochs 2 --seed 3 --out " + at("r2.json")), 0);
  EXPECT_EQ(slurp(at("r1.json")), slurp(at("r2.json")));
}

TEST(Train, MissingAndMalformedData) {
  EXPECT_EQ(run("train --data " + at("nope.csv") + " --out " + at("nope.json")), 3);
  {
    std::ofstream bad(at("bad.csv"));
    bad << "dim=2;mode=paired;seed=1\n0.6;0.4;0.7;0.3;1;0\n0.6;banana;0.7;0.3;1;0\n";
  }
  EXPECT_EQ(run("train --data " + at("bad.csv") + " --out " + at("bad.json")), 4);
}

TEST(Eval, ReportsMetrics) {
  ASSERT_EQ(run("gen --dim 3 --n 200 --seed 5 --out " + at("e3.csv")), 0);
  ASSERT_EQ(run("train --data " + at("e3.csv") + " --epochs 2 --out " + at("e3.json")), 0);
  ASSERT_EQ(run("eval --model " + at("e3.json") + " --data " + at("e3.csv") + " --out " + at("e3_metrics.json")), 0);
  const auto m = nlohmann::json::parse(slurp(at("e3_metrics.json")));
  const auto& c = m["confusion"];
  EXPECT_EQ(c["tp"].get<int>() + c["fp"].get<int>() + c["tn"].get<int>() + c["fn"].get<int>(), 400);
  EXPECT_EQ(run("eval --model " + at("missing.json") + " --data " + at("e3.csv")), 3);
}

TEST(Hist, WritesBins) {
  ASSERT_EQ(run("hist --dim 3 --n 1000 --bins 50 --out " + at("h.csv")), 0);
  EXPECT_EQ(lines(at("h.csv")), 51u);
  EXPECT_EQ(slurp(at("h.csv")).substr(0, 20), "bin_left_edge,count\n");
  EXPECT_EQ(run("hist --dim 3 --n 10 --bins 1 --out " + at("h1.csv")), 2);
}

TEST(Sweep, RunMatrixShape) {
  ASSERT_EQ(run("sweep --dims 3,4,5 --optimizers adam,sgd --seeds 1 --epochs 1 --train-size 100 --test-size 50 "
                "--figures " + at("fig") + " --out " + at("sweep.json")),
            0);
  const auto r = nlohmann::json::parse(slurp(at("sweep.json")));
  EXPECT_EQ(r["runs"].size(), 6u);
  EXPECT_TRUE(fs::exists(work_dir() / "fig" / "boxplot_sgd.csv"));
  ASSERT_EQ(run("sweep --dims 3 --optimizers adam --seeds 1,2 --epochs 2 --train-size 100 --test-size 50 "
                "--format csv --out " + at("sweep.csv")),
            0);
  EXPECT_EQ(lines(at("sweep.csv")), 1u + 2u * 2u);
}

TEST(Transfer, EmitsRecords) {
  ASSERT_EQ(run("transfer --base-dims 3 --seeds 1 --epochs 1 --train-size 100 --test-size 50 --n 20 --out " +
                at("tf.json")),
            0);
  const auto r = nlohmann::json::parse(slurp(at("tf.json")));
  ASSERT_EQ(r["records"].size(), 1u);
  EXPECT_TRUE(r["records"][0].contains("delta"));
}

TEST(Hybrid, EmitsBothStrategies) {
  ASSERT_EQ(run("hybrid --n 40 --epochs 1 --train-size 100 --test-size 50 --out " + at("hy.json")), 0);
  const auto r = nlohmann::json::parse(slurp(at("hy.json")));
  ASSERT_EQ(r["records"].size(), 1u);
  EXPECT_EQ(r["records"][0]["strategies"][0]["input"], 40);
  EXPECT_EQ(r["records"][0]["strategies"][1]["input"], 40);
}

TEST(VerifyPaper, PassesAndListsAnchors) {
  ASSERT_EQ(run("verify-paper"), 0);
  const auto out = slurp(at("last_stdout.txt"));
  for (const char* anchor : {"example-1", "example-2", "example-3", "example-4a", "example-4b"})
    EXPECT_NE(out.find(anchor), std::string::npos) << anchor;
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
}

TEST(VerifyPaper, CoarseToleranceFails) {
  EXPECT_EQ(run("verify-paper --eps 0.1"), 1);
  EXPECT_NE(slurp(at("last_stdout.txt")).find("FAIL example-4"), std::string::npos);
}

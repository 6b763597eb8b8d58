#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GGRASP_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// The single run directory under `out`.
fs::path run_dir(const fs::path& out) {
  fs::path found;
  int n = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("run-", 0) == 0) found = e.path(), ++n;
  EXPECT_EQ(n, 1) << out;
  return found;
}

}  // namespace

TEST(Cli, EndToEndOnFixture) {
  TempDir dir("cli");
  const fs::path data = dir / "data";
  const fs::path log = dir / "log.txt";
  ASSERT_EQ(run("fixture " + data.string() + " --count 6", log), 0) << slurp(log);

  std::ofstream(dir / "small.cfg") << "input.size = 64\nnetwork.base_channels = 8\ntrain.epochs = 1\n"
                                      "train.batch_size = 4\ntrain.augmentations = 0\neval.warmup = 0\n";
  const std::string common = " -c " + (dir / "small.cfg").string() + " --data-root " + data.string() + " -o ";

  ASSERT_EQ(run("encode" + common + (dir / "enc").string(), log), 0) << slurp(log);
  const fs::path enc = run_dir(dir / "enc");
  EXPECT_TRUE(fs::exists(enc / "maps.tsv"));
  EXPECT_TRUE(fs::exists(enc / "config.txt"));
  EXPECT_EQ(slurp(enc / "config_source.txt"), slurp(dir / "small.cfg"));
  EXPECT_NE(slurp(enc / "config.txt").find("input.size = 64"), std::string::npos);

  ASSERT_EQ(run("train" + common + (dir / "train").string() + " --seed 4", log), 0) << slurp(log);
  const fs::path tr = run_dir(dir / "train");
  ASSERT_TRUE(fs::exists(tr / "checkpoint_last.ggckpt"));
  EXPECT_NE(slurp(tr / "config.txt").find("seed = 4\n"), std::string::npos);
  EXPECT_NE(slurp(tr / "command.txt").find("train"), std::string::npos);

  ASSERT_EQ(run("evaluate" + common + (dir / "eval").string() + " --checkpoint " + (tr / "checkpoint_last.ggckpt").string(),
                log),
            0)
      << slurp(log);
  const fs::path ev = run_dir(dir / "eval");
  for (const char* f : {"predictions.json", "result.json", "result.csv"}) EXPECT_TRUE(fs::exists(ev / f)) << f;

  // Re-scoring the cache twice gives identical reports.
  for (const char* o : {"eval2", "eval3"})
    ASSERT_EQ(run("evaluate" + common + (dir / o).string() + " --predictions " + (ev / "predictions.json").string(), log), 0)
        << slurp(log);
  EXPECT_EQ(slurp(run_dir(dir / "eval2") / "result.json"), slurp(run_dir(dir / "eval3") / "result.json"));

  ASSERT_EQ(run("sweep" + common + (dir / "sweep").string() + " --predictions " + (ev / "predictions.json").string(), log), 0)
      << slurp(log);
  const fs::path sw = run_dir(dir / "sweep");
  for (const char* f : {"sweep.json", "sweep_grid.csv", "sweep_jaccard.csv", "sweep_angle.csv"})
    EXPECT_TRUE(fs::exists(sw / f)) << f;

  ASSERT_EQ(run("visualize" + common + (dir / "vis").string() + " --sample 0", log), 0) << slurp(log);
  bool panel = false;
  for (const auto& e : fs::recursive_directory_iterator(dir / "vis")) panel |= e.path().filename() == "panel.png";
  EXPECT_TRUE(panel);
}

TEST(Cli, ReportsErrors) {
  TempDir dir("cli-err");
  const fs::path log = dir / "log.txt";
  std::ofstream(dir / "bad.cfg") << "foo = 1\nbar = 2\n";
  EXPECT_EQ(run("train -c " + (dir / "bad.cfg").string() + " -o " + (dir / "o").string(), log), 1);
  EXPECT_NE(slurp(log).find("unknown config keys: foo bar"), std::string::npos) << slurp(log);
  EXPECT_EQ(run("evaluate --data-root " + dir.path().string() + " -o " + (dir / "o").string(), log), 1);
  EXPECT_NE(slurp(log).find("exactly one of"), std::string::npos) << slurp(log);
  EXPECT_NE(run("", log), 0);
}

TEST(Cli, DataRootFromEnvironment) {
  TempDir dir("cli-env");
  const fs::path log = dir / "log.txt";
  ASSERT_EQ(run("fixture " + (dir / "d").string() + " --count 3", log), 0);
  const std::string cmd = "GRASP_DATA_ROOT=" + (dir / "d").string() + " " + GGRASP_CLI + " encode -s input.size=64 -o " +
                          (dir / "o").string() + " > " + log.string() + " 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("dataset: 3 samples"), std::string::npos) << slurp(log);
}

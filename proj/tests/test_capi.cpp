// Exercises the shared library through its public header only.
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <ggrasp/ggrasp.h>

#include "test_support.hpp"

namespace {

const double kPi = 3.14159265358979323846;

struct ConfigHandle {
  gg_config* p = nullptr;
  ConfigHandle() { EXPECT_EQ(gg_config_create(&p), GG_OK); }
  ~ConfigHandle() { gg_config_destroy(p); }
};

std::string get(const gg_config* cfg, const char* key) {
  size_t needed = 0;
  EXPECT_EQ(gg_config_get(cfg, key, nullptr, 0, &needed), GG_OK);  // size query
  std::string s(needed, '\0');
  EXPECT_EQ(gg_config_get(cfg, key, s.data(), s.size(), &needed), GG_OK);
  s.resize(needed - 1);
  return s;
}

}  // namespace

TEST(CApi, StatusAndErrors) {
  EXPECT_STREQ(gg_status_name(GG_OK), "ok");
  EXPECT_NE(std::strlen(gg_version()), 0u);
  gg_rect bad{0, 0, 0, 0, 1};
  gg_point pts[4];
  EXPECT_EQ(gg_rect_corners(&bad, pts), GG_ERR_DEGENERATE);
  EXPECT_NE(std::string(gg_last_error()).find("degenerate"), std::string::npos);
  EXPECT_EQ(gg_rect_corners(nullptr, pts), GG_ERR_NULL_ARGUMENT);
}

TEST(CApi, Geometry) {
  const gg_rect a{0, 0, 0, 4, 2}, b{2, 0, 0, 4, 2};
  double j = 0;
  ASSERT_EQ(gg_jaccard(&a, &b, &j), GG_OK);
  EXPECT_NEAR(j, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(gg_angle_difference(0.1, kPi - 0.1), 0.2, 1e-12);
  const gg_metric_config m = gg_metric_default();
  EXPECT_EQ(m.jaccard_threshold, 0.25);
  gg_match match{};
  ASSERT_EQ(gg_match_rectangle(&a, &b, 1, &m, &match), GG_OK);
  EXPECT_EQ(match.matched, 1);
  EXPECT_EQ(gg_match_rectangle(&a, &b, 0, &m, &match), GG_ERR_NO_GROUND_TRUTH);
}

TEST(CApi, ConfigRoundTrip) {
  ConfigHandle c;
  EXPECT_EQ(get(c.p, "encoder.K"), "18");
  EXPECT_EQ(gg_config_set(c.p, "encoder.K=12"), GG_OK);
  EXPECT_EQ(get(c.p, "encoder.K"), "12");
  EXPECT_EQ(gg_config_set(c.p, "nope=1"), GG_ERR_CONFIG);
  EXPECT_NE(std::string(gg_last_error()).find("unknown config keys: nope"), std::string::npos);
  char hash[9];
  ASSERT_EQ(gg_config_hash(c.p, hash), GG_OK);
  EXPECT_EQ(std::strlen(hash), 8u);
  size_t needed = 0;
  char small[4];
  EXPECT_EQ(gg_config_canonical(c.p, small, sizeof small, &needed), GG_ERR_BUFFER_TOO_SMALL);
  EXPECT_GT(needed, 100u);
  EXPECT_EQ(small[3], '\0');
}

TEST(CApi, EncodeDecodeClosure) {
  ConfigHandle c;
  const gg_rect r{60, 50, 0.4, 50, 20};
  gg_maps* maps = nullptr;
  ASSERT_EQ(gg_encode(c.p, &r, 1, 100, 120, &maps), GG_OK);
  int k = 0, h = 0, w = 0;
  gg_maps_shape(maps, &k, &h, &w);
  EXPECT_EQ(k, 18);
  std::vector<double> q(static_cast<size_t>(h) * w);
  EXPECT_EQ(gg_maps_quality(maps, q.data(), q.size() - 1), GG_ERR_BUFFER_TOO_SMALL);
  ASSERT_EQ(gg_maps_quality(maps, q.data(), q.size()), GG_OK);
  EXPECT_EQ(q[50 * 120 + 60], 1.0);
  gg_pose poses[3];
  size_t count = 0;
  ASSERT_EQ(gg_decode(c.p, maps, poses, 3, &count), GG_OK);
  ASSERT_GE(count, 1u);
  gg_rect back{};
  ASSERT_EQ(gg_pose_to_rect(c.p, &poses[0], &back), GG_OK);
  gg_match m{};
  const gg_metric_config mc = gg_metric_default();
  ASSERT_EQ(gg_match_rectangle(&back, &r, 1, &mc, &m), GG_OK);
  EXPECT_EQ(m.matched, 1);
  gg_maps_destroy(maps);

  double v[18];
  ASSERT_EQ(gg_angle_vector(c.p, 80 * kPi / 180, v, 18), GG_OK);
  int bin = -1;
  gg_angle_to_bin(c.p, 80 * kPi / 180, &bin);
  EXPECT_EQ(bin, 8);
  EXPECT_EQ(v[8], 1.0);
}

TEST(CApi, PipelineOnFixture) {
  TempDir dir("capi");
  const std::string root = (dir / "data").string();
  ASSERT_EQ(gg_write_fixture(root.c_str(), "cornell", 4, 3), GG_OK);
  ConfigHandle c;
  for (const char* s : {"input.size=64", "network.base_channels=8", "train.epochs=1", "train.batch_size=4",
                        "train.augmentations=0", "split.train_fraction=0.75", "eval.warmup=0"})
    ASSERT_EQ(gg_config_set(c.p, s), GG_OK) << s;
  gg_dataset* ds = nullptr;
  ASSERT_EQ(gg_dataset_open(c.p, root.c_str(), &ds), GG_OK) << gg_last_error();
  EXPECT_EQ(gg_dataset_size(ds), 4u);
  size_t ntrain = 0, ntest = 0;
  ASSERT_EQ(gg_dataset_split(c.p, ds, nullptr, 0, &ntrain, nullptr, 0, &ntest), GG_OK);
  EXPECT_EQ(ntrain, 3u);
  EXPECT_EQ(ntest, 1u);

  gg_network* net = nullptr;
  ASSERT_EQ(gg_network_create(c.p, &net), GG_OK);
  EXPECT_EQ(gg_network_head_channels(net), 20);
  gg_train_summary s{};
  ASSERT_EQ(gg_train(c.p, ds, net, (dir / "train").c_str(), &s), GG_OK) << gg_last_error();
  EXPECT_EQ(s.steps, 1);
  EXPECT_TRUE(std::filesystem::exists(dir / "train" / "checkpoint_last.ggckpt"));

  gg_predictions* preds = nullptr;
  ASSERT_EQ(gg_predict(c.p, net, ds, &preds), GG_OK);
  EXPECT_EQ(gg_predictions_count(preds), 1u);
  gg_eval_result* r = nullptr;
  ASSERT_EQ(gg_evaluate(c.p, preds, ds, &r), GG_OK);
  int matched = -1, samples = 0;
  gg_eval_counts(r, &matched, &samples);
  EXPECT_EQ(samples, 1);
  EXPECT_EQ(gg_eval_accuracy(r), static_cast<double>(matched));
  gg_sweep_result* sw = nullptr;
  ASSERT_EQ(gg_sweep(c.p, preds, ds, &sw), GG_OK);
  double acc = -1;
  ASSERT_EQ(gg_sweep_accuracy(sw, 0.25, kPi / 6, &acc), GG_OK);
  EXPECT_EQ(acc, gg_eval_accuracy(r));
  ASSERT_EQ(gg_sweep_write(sw, (dir / "sweep").c_str()), GG_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "sweep" / "sweep_grid.csv"));
  ASSERT_EQ(gg_visualize(c.p, ds, 0, net, (dir / "vis").c_str()), GG_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "vis" / "panel.png"));

  gg_sweep_result_destroy(sw);
  gg_eval_result_destroy(r);
  gg_predictions_destroy(preds);
  gg_network_destroy(net);
  gg_dataset_destroy(ds);
  EXPECT_EQ(gg_network_load((dir / "missing.ggckpt").c_str(), &net), GG_ERR_IO);
}

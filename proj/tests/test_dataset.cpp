#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dataset.hpp"
#include "error.hpp"
#include "fixture.hpp"
#include "image.hpp"
#include "label_codec.hpp"
#include "oracles.hpp"
#include "random.hpp"
#include "test_support.hpp"

using namespace ggrasp;
namespace fs = std::filesystem;

namespace {

const double kDeg = kPi / 180.0;

GraspSample simple_sample(int h = 60, int w = 80) {
  GraspSample s;
  s.rgb = RgbImage(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) s.rgb.at(y, x)[0] = static_cast<std::uint8_t>(x);
  s.depth = DepthImage(h, w, 0.5f);
  s.rects = {GraspRectangle({40, 30}, 30 * kDeg, 30, 14), GraspRectangle({20, 20}, 0.0, 16, 8)};
  s.source_id = "s";
  s.object_id = "o";
  return s;
}

}  // namespace

TEST(Cornell, RectangleFromCorners) {
  const auto r = rectangle_from_corners({Point{10, 20}, Point{50, 20}, Point{50, 40}, Point{10, 40}});
  ASSERT_TRUE(r.has_value());
  EXPECT_DOUBLE_EQ(r->center().x, 30);
  EXPECT_DOUBLE_EQ(r->center().y, 30);
  EXPECT_DOUBLE_EQ(r->angle(), 0.0);
  EXPECT_DOUBLE_EQ(r->width(), 40);
  EXPECT_DOUBLE_EQ(r->height(), 20);
  EXPECT_FALSE(rectangle_from_corners({Point{std::nan(""), 1}, Point{2, 2}, Point{3, 3}, Point{4, 4}}).has_value());
}

TEST(Cornell, CornersRoundTripThroughRectCorners) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const GraspRectangle r({uniform(rng, 50, 500), uniform(rng, 50, 400)}, uniform(rng, 0, kPi), uniform(rng, 10, 80),
                           uniform(rng, 5, 40));
    const auto back = rectangle_from_corners(rect_corners(r));
    ASSERT_TRUE(back.has_value());
    EXPECT_NEAR(back->center().x, r.center().x, 1e-9);
    EXPECT_NEAR(back->width(), r.width(), 1e-9);
    EXPECT_NEAR(back->height(), r.height(), 1e-9);
    EXPECT_NEAR(angle_difference(back->angle(), r.angle()), 0.0, 1e-9);
  }
}

TEST(Cornell, ParsesFixtureAndSkipsCorruptAnnotations) {
  TempDir dir("cornell");
  FixtureSpec spec;
  spec.count = 6;
  spec.corrupt_annotations = 2;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  EXPECT_EQ(ds.kind(), DatasetKind::kCornell);
  ASSERT_EQ(ds.size(), 6u);
  EXPECT_EQ(ds.skipped_annotations(), 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_FALSE(ds.record(i).rects.empty());
    EXPECT_FALSE(ds.record(i).object_id.empty());
  }
  // Three scenes per object in the fixture.
  EXPECT_EQ(ds.record(0).object_id, ds.record(2).object_id);
  EXPECT_NE(ds.record(0).object_id, ds.record(3).object_id);
  const GraspSample s = ds.load(0);
  EXPECT_EQ(s.rgb.height, spec.height);
  EXPECT_EQ(s.depth.width, spec.width);
  int invalid = 0;
  for (float d : s.depth.data) {
    if (std::isnan(d)) {
      ++invalid;
    } else {
      EXPECT_TRUE(std::fabs(d - 0.66f) < 1e-3 || std::fabs(d - 0.70f) < 1e-3) << d;
    }
  }
  EXPECT_GT(invalid, 0);  // flagged, not zero-filled
}

TEST(Cornell, MissingFilesNameTheSample) {
  TempDir dir("cornell-missing");
  FixtureSpec spec;
  spec.count = 2;
  write_fixture(dir.path(), spec);
  fs::remove(dir.path() / "1" / "pcd0100r.png");
  try {
    parse_cornell(dir.path());
    FAIL() << "parsed a sample without its image";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pcd0100"), std::string::npos) << e.what();
  }
  TempDir empty("cornell-empty");
  EXPECT_THROW(parse_cornell(empty.path()), Error);
}

TEST(Jacquard, LineMapping) {
  const auto r = parse_jacquard_line("512;512;45;100;50");
  EXPECT_DOUBLE_EQ(r.center().x, 512);
  EXPECT_DOUBLE_EQ(r.center().y, 512);
  EXPECT_NEAR(r.angle(), kPi / 4, 1e-15);
  EXPECT_DOUBLE_EQ(r.width(), 100);
  EXPECT_DOUBLE_EQ(r.height(), 50);
  EXPECT_NEAR(parse_jacquard_line("1;2;-30;10;5").angle(), 150 * kDeg, 1e-12);
  EXPECT_THROW(parse_jacquard_line("1;2;x;10;5"), Error);
}

TEST(Jacquard, TwelveScenesSplitFiveToOne) {
  TempDir dir("jacquard");
  FixtureSpec spec;
  spec.kind = DatasetKind::kJacquard;
  spec.count = 12;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_jacquard(dir.path());
  ASSERT_EQ(ds.size(), 12u);
  SplitSpec s;
  s.train_fraction = 5.0 / 6.0;
  const Split split = make_split(ds, s);
  EXPECT_EQ(split.train.size(), 10u);
  EXPECT_EQ(split.test.size(), 2u);
  const GraspSample sample = ds.load(3);
  EXPECT_FALSE(sample.rects.empty());
}

TEST(Split, ImageWisePartition) {
  TempDir dir("split");
  FixtureSpec spec;
  spec.count = 10;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  SplitSpec s;
  s.seed = 42;
  const Split a = make_split(ds, s);
  EXPECT_EQ(a.train.size(), 9u);
  EXPECT_EQ(a.test.size(), 1u);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (std::size_t i : a.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), ds.size());
  const Split b = make_split(ds, s);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, ObjectWiseKeepsObjectsTogether) {
  TempDir dir("split-obj");
  FixtureSpec spec;
  spec.count = 9;  // three objects
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitSpec s;
    s.mode = SplitMode::kObjectWise;
    s.train_fraction = 0.67;
    s.seed = seed;
    const Split split = make_split(ds, s);
    std::set<std::string> train_objects, test_objects;
    for (std::size_t i : split.train) train_objects.insert(ds.record(i).object_id);
    for (std::size_t i : split.test) test_objects.insert(ds.record(i).object_id);
    for (const auto& o : test_objects) EXPECT_EQ(train_objects.count(o), 0u);
    EXPECT_EQ(split.train.size() + split.test.size(), ds.size());
    EXPECT_EQ(test_objects.size(), 1u);
  }
}

TEST(Split, KFoldCoversEverySampleOnce) {
  TempDir dir("split-k");
  FixtureSpec spec;
  spec.count = 10;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  std::multiset<std::size_t> seen;
  for (int f = 0; f < 5; ++f) {
    SplitSpec s;
    s.folds = 5;
    s.fold = f;
    const Split split = make_split(ds, s);
    seen.insert(split.test.begin(), split.test.end());
  }
  EXPECT_EQ(seen.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(Split, ManifestRoundTrip) {
  TempDir dir("manifest");
  FixtureSpec spec;
  spec.count = 4;
  write_fixture(dir.path() / "data", spec);
  const Dataset ds = parse_cornell(dir.path() / "data");
  write_manifest(dir / "m.tsv", ds, {0, 2, 3});
  const auto rows = read_manifest(dir / "m.tsv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].first, ds.record(2).source_id);
  EXPECT_EQ(rows[1].second, ds.record(2).object_id);
}

TEST(Augment, IdentityTranslate) {
  const GraspSample s = simple_sample();
  AugmentParams p;
  p.op = AugmentOp::kTranslate;
  const GraspSample out = augment(s, p);
  EXPECT_EQ(out.rgb.data, s.rgb.data);
  EXPECT_EQ(out.depth.data, s.depth.data);
  EXPECT_EQ(out.rects, s.rects);
}

TEST(Augment, FlipReflectsAngle) {
  const GraspSample s = simple_sample();
  AugmentParams p;
  p.op = AugmentOp::kFlipH;
  const GraspSample out = augment(s, p);
  EXPECT_NEAR(out.rects[0].angle(), 150 * kDeg, 1e-12);
  EXPECT_DOUBLE_EQ(out.rects[0].center().x, 80 - 1 - 40);
  EXPECT_EQ(out.rgb.at(0, 79)[0], s.rgb.at(0, 0)[0]);
  // Flipping twice restores everything.
  const GraspSample back = augment(out, p);
  EXPECT_EQ(back.rgb.data, s.rgb.data);
  EXPECT_NEAR(back.rects[0].angle(), s.rects[0].angle(), 1e-12);
}

TEST(Augment, TranslateDropsRectanglesLeavingFrame) {
  const GraspSample s = simple_sample();
  AugmentParams p;
  p.op = AugmentOp::kTranslate;
  p.dx = 50;
  const GraspSample out = augment(s, p);
  ASSERT_EQ(out.rects.size(), 1u);  // (40,30)->(90,30) leaves, (20,20)->(70,20) stays
  EXPECT_DOUBLE_EQ(out.rects[0].center().x, 70);
  EXPECT_TRUE(std::isnan(out.depth.at(0, 0)));
  p.dx = 100;
  try {
    augment(s, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyLabels);
    EXPECT_STREQ(e.what(), "augmentation emptied labels");
  }
}

TEST(Augment, CropThenEncodeMatchesEncodeThenCrop) {
  const EncoderConfig cfg;
  Rng rng(17);
  TempDir dir("aug-crop");
  FixtureSpec spec;
  spec.count = 20;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const GraspSample s = ds.load(i);
    AugmentParams p;
    p.op = AugmentOp::kCrop;
    p.crop_width = 120;
    p.crop_height = 96;
    p.x0 = static_cast<int>(uniform_index(rng, s.rgb.width - p.crop_width + 1));
    p.y0 = static_cast<int>(uniform_index(rng, s.rgb.height - p.crop_height + 1));
    GraspSample cropped;
    try {
      cropped = augment(s, p);
    } catch (const Error&) {
      continue;
    }
    const GraspMaps a = encode(cropped.rects, p.crop_height, p.crop_width, cfg);
    const GraspMaps full = encode(s.rects, s.rgb.height, s.rgb.width, cfg);
    // Compare only where the kept rectangles determine the value on both sides.
    const GraspMaps kept_full = encode(
        [&] {
          std::vector<GraspRectangle> v;
          for (const auto& r : cropped.rects) v.push_back(r.translated(p.x0, p.y0));
          return v;
        }(),
        s.rgb.height, s.rgb.width, cfg);
    double worst = 0.0;
    for (int y = 0; y < p.crop_height; ++y)
      for (int x = 0; x < p.crop_width; ++x)
        worst = std::max(worst, std::fabs(a.q(y, x) - kept_full.q(y + p.y0, x + p.x0)));
    EXPECT_LE(worst, 0.02);
    EXPECT_EQ(cropped.rgb.width, p.crop_width);
    EXPECT_EQ(cropped.rgb.at(0, 0)[1], s.rgb.at(p.y0, p.x0)[1]);
    (void)full;
  }
}

TEST(Augment, RandomAugmentationsKeepLabelsDecodable) {
  const EncoderConfig enc;
  const DecoderConfig dec;
  TempDir dir("aug-rand");
  FixtureSpec spec;
  spec.count = 10;
  write_fixture(dir.path(), spec);
  const Dataset ds = parse_cornell(dir.path());
  int passed = 0, total = 0;
  for (int n = 0; n < 100; ++n) {
    Rng rng = derived_rng(5, n);
    const GraspSample s = ds.load(n % ds.size());
    const GraspSample a = augment(s, random_augment_params(s, rng));
    ASSERT_FALSE(a.rects.empty());
    for (const auto& r : a.rects) {
      EXPECT_GT(r.width(), 0);
      EXPECT_GE(r.angle(), 0);
      EXPECT_LT(r.angle(), kPi);
    }
    const auto poses = decode(encode(a.rects, a.rgb.height, a.rgb.width, enc), 1, enc, dec);
    ++total;
    if (!poses.empty() && rectangle_metric(pose_to_rectangle(poses[0], dec), a.rects, MetricConfig{})) ++passed;
  }
  EXPECT_GE(passed, 95) << passed << "/" << total;
}

TEST(NetworkInput, ShapeScalingAndDepth) {
  GraspSample s = simple_sample(480, 640);
  for (int y = 0; y < 480; ++y)
    for (int x = 0; x < 640; ++x) s.rgb.at(y, x)[2] = 255;
  const NetworkInput in = to_network_input(s, 320);
  EXPECT_EQ(in.size, 320);
  ASSERT_EQ(in.data.size(), 4u * 320 * 320);
  const std::size_t plane = 320 * 320;
  for (std::size_t i = 0; i < plane; ++i) {
    EXPECT_EQ(in.data[2 * plane + i], 1.0);
    EXPECT_EQ(in.data[3 * plane + i], 0.0);  // constant depth
  }
  EXPECT_THROW(to_network_input(s, 300), Error);
}

TEST(NetworkInput, InpaintsAndRejectsAllInvalid) {
  GraspSample s = simple_sample(64, 64);
  s.depth.at(10, 10) = std::nanf("");
  s.depth.at(20, 20) = 0.7f;
  const NetworkInput in = to_network_input(s, 64);
  for (double v : in.data) ASSERT_TRUE(std::isfinite(v));
  const std::size_t plane = 64 * 64;
  for (std::size_t k = 0; k < plane; ++k) {
    EXPECT_GE(in.data[3 * plane + k], -1.0);
    EXPECT_LE(in.data[3 * plane + k], 1.0);
  }
  std::fill(s.depth.data.begin(), s.depth.data.end(), std::nanf(""));
  try {
    to_network_input(s, 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDepth);
  }
}

TEST(NetworkInput, TransformMapsRectanglesConsistently) {
  const InputTransform t = make_input_transform(480, 640, 320, 0);
  // Largest centered square is 480 wide starting at x = 80, scaled by 2/3.
  EXPECT_DOUBLE_EQ(t.x0, 80);
  EXPECT_DOUBLE_EQ(t.y0, 0);
  const Point p = t.to_network({320, 240});
  const Point back = t.to_image(p);
  EXPECT_NEAR(back.x, 320, 1e-12);
  EXPECT_NEAR(back.y, 240, 1e-12);
  const auto rects = t.rects_to_network({GraspRectangle({320, 240}, 0.3, 60, 30), GraspRectangle({10, 240}, 0, 6, 3)});
  ASSERT_EQ(rects.size(), 1u);
  EXPECT_NEAR(rects[0].width(), 40, 1e-12);
  const GraspPose g = t.pose_to_image(GraspPose{rects[0].center(), rects[0].angle(), rects[0].width(), 1});
  EXPECT_NEAR(g.width, 60, 1e-12);
  EXPECT_NEAR(g.center.x, 320, 1e-9);
}

TEST(Image, PngAndTiffRoundTrip) {
  TempDir dir("img");
  GraspSample s = simple_sample(20, 30);
  s.depth.at(3, 4) = std::nanf("");
  write_rgb_png(dir / "a.png", s.rgb);
  write_depth_tiff(dir / "a.tiff", s.depth);
  const RgbImage rgb = read_rgb(dir / "a.png");
  EXPECT_EQ(rgb.data, s.rgb.data);
  const DepthImage d = read_depth_tiff(dir / "a.tiff");
  EXPECT_TRUE(std::isnan(d.at(3, 4)));
  EXPECT_EQ(d.at(5, 5), 0.5f);
  EXPECT_THROW(read_rgb(dir / "missing.png"), Error);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "image.hpp"
#include "random.hpp"

namespace ggrasp {

enum class DatasetKind { kCornell, kJacquard };

struct GraspSample {
  RgbImage rgb;
  DepthImage depth;
  std::vector<GraspRectangle> rects;
  /// Parsed for completeness; never used by the encoding.
  std::vector<GraspRectangle> negatives;
  std::string object_id;
  std::string source_id;
};

enum class DepthSource { kCornellPointCloud, kTiff };

/// Annotations and file locations of one sample. Pixels load on demand.
struct SampleRecord {
  std::string source_id;
  std::string object_id;
  std::filesystem::path rgb_path;
  std::filesystem::path depth_path;
  DepthSource depth_source = DepthSource::kTiff;
  std::vector<GraspRectangle> rects;
  std::vector<GraspRectangle> negatives;
};

class Dataset {
 public:
  Dataset(DatasetKind kind, std::vector<SampleRecord> records, int skipped_annotations);

  DatasetKind kind() const { return kind_; }
  std::size_t size() const { return records_.size(); }
  const SampleRecord& record(std::size_t i) const { return records_.at(i); }
  const std::vector<SampleRecord>& records() const { return records_; }
  /// Annotations dropped while parsing (NaN corners, zero extents).
  int skipped_annotations() const { return skipped_; }
  std::optional<std::size_t> index_of(const std::string& source_id) const;

  GraspSample load(std::size_t i) const;

 private:
  DatasetKind kind_;
  std::vector<SampleRecord> records_;
  int skipped_;
};

/// Cornell layout: any directory depth below `root` holding pcdNNNNr.png,
/// pcdNNNNcpos.txt, optional pcdNNNNcneg.txt and either pcdNNNNd.tiff or the
/// ASCII point cloud pcdNNNN.txt. Object ids come from `root/manifest.tsv`
/// (sample id, tab, object id) when present, otherwise each image is its own object.
Dataset parse_cornell(const std::filesystem::path& root);

/// Jacquard layout: `<root>/<object id>/<scene>_<object id>_{RGB.png,perfect_depth.tiff,grasps.txt}`.
Dataset parse_jacquard(const std::filesystem::path& root);

Dataset parse_dataset(DatasetKind kind, const std::filesystem::path& root);

/// One rectangle from four corners; the first edge runs along the grasp axis.
/// Returns nullopt for NaN or degenerate corners.
std::optional<GraspRectangle> rectangle_from_corners(const std::array<Point, 4>& corners);

/// "x;y;theta_deg;opening;jaw" as written in Jacquard grasp files.
GraspRectangle parse_jacquard_line(const std::string& line);

DepthImage read_cornell_point_cloud(const std::filesystem::path& path, int height, int width);

enum class SplitMode { kImageWise, kObjectWise };

struct SplitSpec {
  SplitMode mode = SplitMode::kImageWise;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  /// With folds > 1 the test partition is fold `fold` of a k-fold partition.
  int folds = 1;
  int fold = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Split make_split(const Dataset& dataset, const SplitSpec& spec);

/// Tab-separated "sample id, object id" lines.
void write_manifest(const std::filesystem::path& path, const Dataset& dataset, const std::vector<std::size_t>& indices);
std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& path);

enum class AugmentOp { kCrop, kFlipH, kTranslate };

struct AugmentParams {
  AugmentOp op = AugmentOp::kTranslate;
  // Crop window.
  int x0 = 0, y0 = 0, crop_width = 0, crop_height = 0;
  // Translation in pixels.
  int dx = 0, dy = 0;
};

GraspSample augment(const GraspSample& sample, const AugmentParams& params);

/// Draws an operation and parameters that keep at least one rectangle center in frame.
AugmentParams random_augment_params(const GraspSample& sample, Rng& rng);

/// Center crop then resize from the original image into the network frame.
struct InputTransform {
  double x0 = 0.0;
  double y0 = 0.0;
  double scale = 1.0;
  int crop = 0;
  int out_size = 0;

  Point to_network(Point p) const;
  Point to_image(Point p) const;
  /// Rectangles whose centers fall outside the network frame are dropped.
  std::vector<GraspRectangle> rects_to_network(const std::vector<GraspRectangle>& rects) const;
  GraspPose pose_to_image(const GraspPose& g) const;
};

InputTransform make_input_transform(int height, int width, int out_size, int crop_size);

struct NetworkInput {
  int size = 0;
  /// 4 x size x size, channels R, G, B, D.
  std::vector<double> data;
  InputTransform transform;
};

/// RGB scaled to [0, 1]; depth inpainted, resized, mean-subtracted and clipped to [-1, 1].
/// `crop_size` 0 selects the largest centered square.
NetworkInput to_network_input(const GraspSample& sample, int out_size, int crop_size = 0);

}  // namespace ggrasp

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"
#include "label_codec.hpp"
#include "network.hpp"
#include "pipeline.hpp"
#include "training.hpp"

namespace ggrasp {

/// Top-1 prediction for one sample, in image coordinates.
struct Prediction {
  std::string source_id;
  /// False when the quality map had no peak or the decoded width was not positive.
  bool valid = false;
  GraspPose pose;
  GraspRectangle rect{{0.0, 0.0}, 0.0, 1.0, 1.0};
  double inference_ms = 0.0;
};

struct PredictionSet {
  std::vector<Prediction> items;
  /// Forward plus decode wall time, averaged after the warmup samples.
  double mean_inference_ms = 0.0;
  int warmup = 10;

  const Prediction* find(const std::string& source_id) const;
};

/// Runs the network one sample at a time. Timing excludes sample loading.
PredictionSet predict_inputs(const GraspNetwork& net, const std::vector<std::string>& ids,
                             const std::vector<NetworkInput>& inputs, const EncoderConfig& enc,
                             const DecoderConfig& dec, int warmup);
PredictionSet predict(const GraspNetwork& net, const Dataset& dataset, const std::vector<std::size_t>& indices,
                      const InputConfig& input, const EncoderConfig& enc, const DecoderConfig& dec, int warmup = 10);

void save_predictions(const std::filesystem::path& path, const PredictionSet& preds);
PredictionSet load_predictions(const std::filesystem::path& path);

struct SampleScore {
  std::string source_id;
  bool valid = false;
  GraspPose pose;
  bool matched = false;
  double best_jaccard = 0.0;
  double best_angle_difference = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  int matched = 0;
  int samples = 0;
  std::vector<SampleScore> per_sample;
  MetricConfig config;
  double mean_inference_ms = 0.0;
};

/// Scores cached predictions against the positive rectangles of `indices`.
/// Every index needs a prediction with the same source id.
EvalResult evaluate(const PredictionSet& preds, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const MetricConfig& cfg);
/// Same scoring with the ground truth given directly, one list per prediction.
EvalResult evaluate(const PredictionSet& preds, const std::vector<std::vector<GraspRectangle>>& truths,
                    const MetricConfig& cfg);

struct SweepPoint {
  MetricConfig config;
  double accuracy = 0.0;
};

struct SweepResult {
  std::vector<double> jaccard_list;
  std::vector<double> angle_list;  // radians
  std::vector<SweepPoint> grid;    // jaccard-major
  std::vector<SweepPoint> jaccard_curve;  // angle fixed at 30 degrees
  std::vector<SweepPoint> angle_curve;    // jaccard fixed at 0.25

  double at(double jaccard, double angle) const;
};

SweepResult sweep(const PredictionSet& preds, const std::vector<std::vector<GraspRectangle>>& truths,
                  const std::vector<double>& jaccard_list, const std::vector<double>& angle_list);
SweepResult sweep(const PredictionSet& preds, const Dataset& dataset, const std::vector<std::size_t>& indices,
                  const std::vector<double>& jaccard_list, const std::vector<double>& angle_list);

std::vector<std::vector<GraspRectangle>> truths_for(const PredictionSet& preds, const Dataset& dataset,
                                                    const std::vector<std::size_t>& indices);

struct AblationVariant {
  bool ggt = true;
  bool glff = true;
  std::string name() const;
};

struct AblationRow {
  AblationVariant variant;
  EvalResult at_defaults;
  SweepResult sweep;
  double final_loss = 0.0;
};

struct AblationSettings {
  NetworkConfig network;
  TrainConfig train;
  TrainOptions options;
  std::vector<double> jaccard_list;
  std::vector<double> angle_list;
};

/// Trains and scores every variant under the same seeds. GGT off switches the
/// encoder to uniform quality; GLFF off replaces the fusion blocks with identity.
std::vector<AblationRow> ablate(const Dataset& dataset, const Split& split, const std::vector<AblationVariant>& variants,
                                const AblationSettings& settings);

std::string eval_result_json(const EvalResult& r);
std::string eval_result_csv(const EvalResult& r);
std::string sweep_result_json(const SweepResult& s);
/// Header "jaccard,angle_deg,accuracy".
std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string ablation_json(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace ggrasp

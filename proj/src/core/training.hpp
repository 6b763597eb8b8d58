#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "autograd.hpp"
#include "dataset.hpp"
#include "label_codec.hpp"
#include "network.hpp"
#include "pipeline.hpp"

namespace ggrasp {

struct TrainConfig {
  double lr_initial = 1e-3;
  int epochs = 60;
  int plateau_patience = 10;
  /// Batches in the running mean the plateau rule watches.
  int plateau_window = 10;
  /// Relative improvement of the running mean that counts as "reduced".
  double plateau_tolerance = 1e-3;
  double lr_decay_factor = 0.1;
  double smooth_l1_sigma = 1.0;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Random augmentations per image per epoch; negative picks the dataset
  /// default (8 for Cornell, none for Jacquard). Zero trains on the originals.
  int augmentations = -1;
  /// Stop after this many optimizer steps; 0 means no limit.
  int max_steps = 0;
  int eval_every = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct ComponentLoss {
  double quality = 0.0;
  double angle = 0.0;
  double width = 0.0;
};

struct LossReport {
  double total = 0.0;
  std::array<double, 3> per_scale{};
  std::array<ComponentLoss, 3> per_component{};
};

double smooth_l1(double x, double sigma);
double smooth_l1_grad(double x, double sigma);

/// Sum of smooth L1 over the quality, angle and width planes, each group
/// divided by the pixel count of the scale.
ComponentLoss scale_loss(const GraspMaps& pred, const GraspMaps& target, double sigma);
LossReport total_loss(const std::vector<GraspMaps>& preds, const std::vector<GraspMaps>& targets, double sigma);

/// Differentiable scale loss over a head tensor, averaged over the batch.
nn::Var scale_loss(const nn::Var& head, const nn::Tensor& target, double sigma, ComponentLoss* report = nullptr);
/// Mean of the three scale losses.
nn::Var total_loss(const NetworkOutput& out, const std::array<nn::Tensor, 3>& targets, double sigma,
                   LossReport* report = nullptr);

class Adam {
 public:
  Adam(const GraspNetwork& net, double lr, double beta1, double beta2, double epsilon);
  void step(GraspNetwork& net);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Learning-rate schedule: decay once the running mean of recent batch
/// losses stops improving for `patience` consecutive batches, at most once per epoch.
class PlateauSchedule {
 public:
  PlateauSchedule(int window, int patience, double tolerance, double factor);
  void begin_epoch() { decayed_this_epoch_ = false; }
  /// Records a batch loss; returns true if the learning rate should decay now.
  bool observe(double loss);
  double factor() const { return factor_; }

 private:
  int window_, patience_;
  double tolerance_, factor_;
  std::vector<double> recent_;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
  bool decayed_this_epoch_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;  // NaN when not evaluated
};

struct TrainOptions {
  InputConfig input;
  EncoderConfig encoder;
  DecoderConfig decoder;
  MetricConfig metric;
  /// Output directory for checkpoints and logs; empty writes nothing.
  std::filesystem::path out_dir;
  bool verbose = false;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<EpochRecord> epochs;
  double final_lr = 0.0;
  double best_val_accuracy = -1.0;
  int steps = 0;
};

TrainResult train(GraspNetwork& net, const Dataset& dataset, const Split& split, const TrainConfig& cfg,
                  const TrainOptions& opts);

}  // namespace ggrasp

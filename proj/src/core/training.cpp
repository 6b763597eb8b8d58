#include "training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "checkpoint.hpp"
#include "error.hpp"
#include "evaluation.hpp"

namespace ggrasp {

using nn::Node;
using nn::Shape;
using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
  if (!(lr_initial > 0.0)) fail(ErrorCode::kInvalidArgument, "train: lr must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0))
    fail(ErrorCode::kInvalidArgument, "train: lr decay factor must lie in (0, 1)");
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "train: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "train: batch size must be >= 1");
  if (plateau_patience < 1 || plateau_window < 1) fail(ErrorCode::kInvalidArgument, "train: plateau settings must be >= 1");
  if (!(smooth_l1_sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "train: smooth L1 sigma must be positive");
  if (max_steps < 0 || eval_every < 1) fail(ErrorCode::kInvalidArgument, "train: invalid step settings");
}

double smooth_l1(double x, double sigma) {
  const double ax = std::fabs(x);
  if (ax < 1.0) return (sigma * x) * (sigma * x) / 2.0;
  return ax - 0.5 / (sigma * sigma);
}

double smooth_l1_grad(double x, double sigma) {
  if (std::fabs(x) < 1.0) return sigma * sigma * x;
  return x > 0.0 ? 1.0 : -1.0;
}

ComponentLoss scale_loss(const GraspMaps& pred, const GraspMaps& target, double sigma) {
  if (pred.height != target.height || pred.width != target.width || pred.num_bins != target.num_bins)
    fail(ErrorCode::kShape, "scale loss: prediction and target shapes differ");
  const double pixels = static_cast<double>(pred.pixels());
  ComponentLoss out;
  for (std::size_t i = 0; i < pred.quality.size(); ++i) out.quality += smooth_l1(pred.quality[i] - target.quality[i], sigma);
  for (std::size_t i = 0; i < pred.angle.size(); ++i) out.angle += smooth_l1(pred.angle[i] - target.angle[i], sigma);
  for (std::size_t i = 0; i < pred.width_map.size(); ++i)
    out.width += smooth_l1(pred.width_map[i] - target.width_map[i], sigma);
  out.quality /= pixels;
  out.angle /= pixels;
  out.width /= pixels;
  return out;
}

LossReport total_loss(const std::vector<GraspMaps>& preds, const std::vector<GraspMaps>& targets, double sigma) {
  if (preds.size() != 3 || targets.size() != 3) fail(ErrorCode::kShape, "total loss needs three scales");
  LossReport r;
  for (std::size_t s = 0; s < 3; ++s) {
    r.per_component[s] = scale_loss(preds[s], targets[s], sigma);
    r.per_scale[s] = r.per_component[s].quality + r.per_component[s].angle + r.per_component[s].width;
  }
  r.total = (r.per_scale[0] + r.per_scale[1] + r.per_scale[2]) / 3.0;
  return r;
}

Var scale_loss(const Var& head, const Tensor& target, double sigma, ComponentLoss* report) {
  const Shape s = head.shape();
  if (!(s == target.shape)) fail(ErrorCode::kShape, "scale loss: head " + s.str() + " vs target " + target.shape.str());
  const std::size_t plane = s.plane();
  const double norm = static_cast<double>(plane) * s.n;
  ComponentLoss parts;
  for (int n = 0; n < s.n; ++n) {
    const double* p = head.value().sample(n);
    const double* t = target.sample(n);
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += smooth_l1(p[c * plane + i] - t[c * plane + i], sigma);
      if (nn::KinkTrace::active())
        for (std::size_t i = 0; i < plane; ++i) nn::KinkTrace::record(std::fabs(p[c * plane + i] - t[c * plane + i]) < 1.0);
      if (c == 0) {
        parts.quality += acc;
      } else if (c == s.c - 1) {
        parts.width += acc;
      } else {
        parts.angle += acc;
      }
    }
  }
  parts.quality /= norm;
  parts.angle /= norm;
  parts.width /= norm;
  if (report) *report = parts;
  Tensor value(Shape{});
  value.data[0] = parts.quality + parts.angle + parts.width;
  return nn::make_result(std::move(value), {head}, [target, sigma, norm](Node& self) {
    Node* h = self.inputs[0].get();
    auto& g = h->ensure_grad().data;
    const double scale = self.grad.data[0] / norm;
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += scale * smooth_l1_grad(h->value.data[i] - target.data[i], sigma);
  });
}

Var total_loss(const NetworkOutput& out, const std::array<Tensor, 3>& targets, double sigma, LossReport* report) {
  std::array<Var, 3> parts;
  LossReport r;
  for (std::size_t s = 0; s < 3; ++s) {
    parts[s] = scale_loss(out.heads[s], targets[s], sigma, &r.per_component[s]);
    r.per_scale[s] = parts[s].item();
  }
  Tensor value(Shape{});
  value.data[0] = (r.per_scale[0] + r.per_scale[1] + r.per_scale[2]) / 3.0;
  r.total = value.data[0];
  if (report) *report = r;
  return nn::make_result(std::move(value), {parts[0], parts[1], parts[2]}, [](Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->ensure_grad().data[0] += self.grad.data[0] / 3.0;
  });
}

Adam::Adam(const GraspNetwork& net, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const auto& [name, v] : net.parameters()) {
    m_.emplace_back(v.value().size(), 0.0);
    v_.emplace_back(v.value().size(), 0.0);
  }
}

void Adam::step(GraspNetwork& net) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const auto& params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Var v = params[p].second;
    auto& w = v.value().data;
    const auto& g = v.grad().data;
    auto& m = m_[p];
    auto& s = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      s[i] = beta2_ * s[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(s[i] / c2) + epsilon_);
    }
  }
}

PlateauSchedule::PlateauSchedule(int window, int patience, double tolerance, double factor)
    : window_(window), patience_(patience), tolerance_(tolerance), factor_(factor) {}

bool PlateauSchedule::observe(double loss) {
  recent_.push_back(loss);
  if (static_cast<int>(recent_.size()) > window_) recent_.erase(recent_.begin());
  if (static_cast<int>(recent_.size()) < window_) return false;
  const double mean = std::accumulate(recent_.begin(), recent_.end(), 0.0) / window_;
  if (!has_best_ || mean < best_ * (1.0 - tolerance_)) {
    best_ = mean;
    has_best_ = true;
    stale_ = 0;
    return false;
  }
  ++stale_;
  if (stale_ >= patience_ && !decayed_this_epoch_) {
    decayed_this_epoch_ = true;
    stale_ = 0;
    return true;
  }
  return false;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct WorkItem {
  std::size_t index;      // dataset index
  int augmentation = -1;  // -1 = original
  std::uint64_t stream = 0;
};

}  // namespace

TrainResult train(GraspNetwork& net, const Dataset& dataset, const Split& split, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  cfg.validate();
  opts.input.validate();
  if (split.train.empty()) fail(ErrorCode::kInvalidArgument, "train: empty training split");
  if (opts.encoder.num_bins != net.config().num_bins)
    fail(ErrorCode::kInvalidArgument, "train: encoder K differs from network K");
  const int augmentations =
      cfg.augmentations >= 0 ? cfg.augmentations : (dataset.kind() == DatasetKind::kCornell ? 8 : 0);

  const bool write = !opts.out_dir.empty();
  std::ofstream metrics, steps;
  if (write) {
    std::filesystem::create_directories(opts.out_dir);
    metrics.open(opts.out_dir / "metrics.tsv");
    steps.open(opts.out_dir / "steps.tsv");
    metrics << "epoch\tlr\ttrain_loss\tval_accuracy\n";
    steps << "step\tlr\tloss\n";
  }

  // Small splits stay in memory; large ones are re-read every epoch.
  const bool cache = split.train.size() + split.test.size() <= 256;
  std::map<std::size_t, GraspSample> raw_cache;
  std::map<std::size_t, PreparedSample> prepared_cache;
  auto raw = [&](std::size_t i) -> GraspSample {
    if (!cache) return dataset.load(i);
    auto it = raw_cache.find(i);
    if (it == raw_cache.end()) it = raw_cache.emplace(i, dataset.load(i)).first;
    return it->second;
  };
  auto prepared = [&](const WorkItem& item) -> PreparedSample {
    if (item.augmentation < 0) {
      if (cache) {
        auto it = prepared_cache.find(item.index);
        if (it == prepared_cache.end())
          it = prepared_cache.emplace(item.index, prepare_sample(raw(item.index), opts.input, opts.encoder)).first;
        return it->second;
      }
      return prepare_sample(raw(item.index), opts.input, opts.encoder);
    }
    const GraspSample base = raw(item.index);
    Rng rng = derived_rng(cfg.seed, item.stream);
    const GraspSample aug = augment(base, random_augment_params(base, rng));
    return prepare_sample(aug, opts.input, opts.encoder);
  };

  Adam adam(net, cfg.lr_initial, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  PlateauSchedule plateau(cfg.plateau_window, cfg.plateau_patience, cfg.plateau_tolerance, cfg.lr_decay_factor);
  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) break;
    plateau.begin_epoch();
    std::vector<WorkItem> items;
    for (std::size_t i : split.train) {
      if (augmentations == 0) {
        items.push_back({i, -1, 0});
      } else {
        for (int a = 0; a < augmentations; ++a) {
          const std::uint64_t stream = (static_cast<std::uint64_t>(epoch) << 40) ^ (static_cast<std::uint64_t>(i) << 8) ^
                                       static_cast<std::uint64_t>(a);
          items.push_back({i, a, stream});
        }
      }
    }
    Rng order_rng = derived_rng(cfg.seed, 0xE90C000000000000ULL + static_cast<std::uint64_t>(epoch));
    shuffle(items, order_rng);

    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < items.size(); start += cfg.batch_size) {
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) break;
      const std::size_t end = std::min(items.size(), start + cfg.batch_size);
      std::vector<PreparedSample> batch;
      for (std::size_t j = start; j < end; ++j) batch.push_back(prepared(items[j]));
      std::vector<const NetworkInput*> inputs;
      std::vector<std::vector<GraspMaps>> targets;
      for (const auto& b : batch) {
        inputs.push_back(&b.input);
        targets.push_back(b.targets);
      }
      const Var x(stack_inputs(inputs));
      const NetworkOutput out = net.forward(x);
      LossReport report;
      const Var loss = total_loss(out, maps_to_targets(targets), cfg.smooth_l1_sigma, &report);
      if (!std::isfinite(report.total))
        fail(ErrorCode::kDiverged, "training diverged at step " + std::to_string(result.steps + 1) + " (epoch " +
                                       std::to_string(epoch) + "): loss is " + fmt(report.total));
      net.zero_grad();
      nn::backward(loss);
      adam.step(net);
      ++result.steps;
      result.step_losses.push_back(report.total);
      epoch_loss += report.total;
      ++epoch_batches;
      if (write) steps << result.steps << '\t' << fmt(adam.lr()) << '\t' << fmt(report.total) << '\n';
      if (plateau.observe(report.total)) adam.set_lr(adam.lr() * plateau.factor());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.lr();
    rec.train_loss = epoch_batches > 0 ? epoch_loss / epoch_batches : 0.0;
    rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    const bool last = epoch == cfg.epochs || (cfg.max_steps > 0 && result.steps >= cfg.max_steps);
    if (!split.test.empty() && (epoch % cfg.eval_every == 0 || last)) {
      std::vector<std::string> ids;
      std::vector<NetworkInput> inputs;
      for (std::size_t i : split.test) {
        ids.push_back(dataset.record(i).source_id);
        inputs.push_back(prepared({i, -1, 0}).input);
      }
      const PredictionSet preds = predict_inputs(net, ids, inputs, opts.encoder, opts.decoder, 0);
      rec.val_accuracy = evaluate(preds, dataset, split.test, opts.metric).accuracy;
      if (rec.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = rec.val_accuracy;
        if (write) save_checkpoint(opts.out_dir / "checkpoint_best.ggckpt", net);
      }
    } else if (split.test.empty() && rec.train_loss < best_loss) {
      best_loss = rec.train_loss;
      if (write) save_checkpoint(opts.out_dir / "checkpoint_best.ggckpt", net);
    }
    result.epochs.push_back(rec);
    if (write) {
      metrics << rec.epoch << '\t' << fmt(rec.lr) << '\t' << fmt(rec.train_loss) << '\t' << fmt(rec.val_accuracy) << '\n';
      metrics.flush();
      steps.flush();
      save_checkpoint(opts.out_dir / "checkpoint_last.ggckpt", net);
    }
    if (opts.verbose)
      std::cerr << "epoch " << epoch << " lr " << rec.lr << " loss " << rec.train_loss << " val " << rec.val_accuracy
                << '\n';
  }
  result.final_lr = adam.lr();
  return result;
}

}  // namespace ggrasp

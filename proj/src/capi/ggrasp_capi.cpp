#include "ggrasp/ggrasp.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <string>
#include <utility>

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "fixture.hpp"
#include "geometry.hpp"
#include "label_codec.hpp"
#include "maps_io.hpp"
#include "network.hpp"
#include "pipeline.hpp"
#include "training.hpp"
#include "visualize.hpp"

struct gg_config {
  ggrasp::RunConfig cfg;
};
struct gg_maps {
  ggrasp::GraspMaps maps;
};
struct gg_pyramid {
  std::vector<ggrasp::GraspMaps> levels;
};
struct gg_dataset {
  ggrasp::Dataset ds;
};
struct gg_network {
  ggrasp::GraspNetwork net;
};
struct gg_predictions {
  ggrasp::PredictionSet set;
};
struct gg_eval_result {
  ggrasp::EvalResult result;
};
struct gg_sweep_result {
  ggrasp::SweepResult result;
};
struct gg_ablation {
  std::vector<ggrasp::AblationRow> rows;
};

namespace {

thread_local std::string g_last_error;

gg_status status_of(ggrasp::ErrorCode code) {
  using ggrasp::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return GG_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDegenerate: return GG_ERR_DEGENERATE;
    case ErrorCode::kNoGroundTruth: return GG_ERR_NO_GROUND_TRUTH;
    case ErrorCode::kInvalidDepth: return GG_ERR_INVALID_DEPTH;
    case ErrorCode::kIo: return GG_ERR_IO;
    case ErrorCode::kFormat: return GG_ERR_FORMAT;
    case ErrorCode::kConfig: return GG_ERR_CONFIG;
    case ErrorCode::kDiverged: return GG_ERR_DIVERGED;
    case ErrorCode::kEmptyLabels: return GG_ERR_EMPTY_LABELS;
    case ErrorCode::kShape: return GG_ERR_SHAPE;
  }
  return GG_ERR_INTERNAL;
}

gg_status set_error(gg_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename F>
gg_status guarded(F&& f) {
  try {
    return f();
  } catch (const ggrasp::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(GG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(GG_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(GG_ERR_INTERNAL, "unknown error");
  }
}

#define GG_REQUIRE(ptr)                                                       \
  do {                                                                        \
    if (!(ptr)) return set_error(GG_ERR_NULL_ARGUMENT, #ptr " must not be NULL"); \
  } while (0)

ggrasp::GraspRectangle to_rect(const gg_rect& r) { return ggrasp::GraspRectangle({r.cx, r.cy}, r.angle, r.width, r.height); }

gg_rect from_rect(const ggrasp::GraspRectangle& r) {
  return {r.center().x, r.center().y, r.angle(), r.width(), r.height()};
}

ggrasp::GraspPose to_pose(const gg_pose& p) { return {{p.cx, p.cy}, p.angle, p.width, p.quality}; }

gg_pose from_pose(const ggrasp::GraspPose& p) { return {p.center.x, p.center.y, p.angle, p.width, p.quality}; }

std::vector<ggrasp::GraspRectangle> to_rects(const gg_rect* rects, size_t count) {
  std::vector<ggrasp::GraspRectangle> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(to_rect(rects[i]));
  return out;
}

gg_status copy_string(const std::string& s, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || capacity == 0) return buf ? set_error(GG_ERR_BUFFER_TOO_SMALL, "buffer too small") : GG_OK;
  const size_t n = std::min(capacity - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  if (n < s.size()) return set_error(GG_ERR_BUFFER_TOO_SMALL, "buffer too small");
  return GG_OK;
}

gg_status copy_values(const std::vector<double>& v, double* out, size_t capacity) {
  GG_REQUIRE(out);
  if (capacity < v.size()) return set_error(GG_ERR_BUFFER_TOO_SMALL, "buffer holds " + std::to_string(capacity) +
                                                                         " values, need " + std::to_string(v.size()));
  std::copy(v.begin(), v.end(), out);
  return GG_OK;
}

std::vector<std::size_t> eval_indices(const ggrasp::RunConfig& cfg, const ggrasp::Dataset& ds) {
  const std::string& which = cfg.get("eval.split");
  if (which == "all") {
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const ggrasp::Split split = ggrasp::make_split(ds, cfg.split());
  return which == "train" ? split.train : split.test;
}

}  // namespace

extern "C" {

const char* gg_last_error(void) { return g_last_error.c_str(); }

const char* gg_status_name(gg_status status) {
  switch (status) {
    case GG_OK: return "ok";
    case GG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GG_ERR_DEGENERATE: return "degenerate rectangle";
    case GG_ERR_NO_GROUND_TRUTH: return "no ground truth";
    case GG_ERR_INVALID_DEPTH: return "invalid depth";
    case GG_ERR_IO: return "i/o error";
    case GG_ERR_FORMAT: return "format error";
    case GG_ERR_CONFIG: return "config error";
    case GG_ERR_DIVERGED: return "diverged";
    case GG_ERR_EMPTY_LABELS: return "empty labels";
    case GG_ERR_SHAPE: return "shape mismatch";
    case GG_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case GG_ERR_NULL_ARGUMENT: return "null argument";
    case GG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gg_version(void) { return "0.1.0"; }

gg_metric_config gg_metric_default(void) {
  const ggrasp::MetricConfig m;
  return {m.jaccard_threshold, m.angle_threshold};
}

gg_status gg_rect_corners(const gg_rect* r, gg_point out[4]) {
  GG_REQUIRE(r);
  GG_REQUIRE(out);
  return guarded([&] {
    const auto c = ggrasp::rect_corners(to_rect(*r));
    for (int i = 0; i < 4; ++i) out[i] = {c[i].x, c[i].y};
    return GG_OK;
  });
}

gg_status gg_jaccard(const gg_rect* a, const gg_rect* b, double* out) {
  GG_REQUIRE(a);
  GG_REQUIRE(b);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = ggrasp::jaccard(to_rect(*a), to_rect(*b));
    return GG_OK;
  });
}

double gg_angle_difference(double a, double b) { return ggrasp::angle_difference(a, b); }

gg_status gg_match_rectangle(const gg_rect* pred, const gg_rect* truths, size_t count, const gg_metric_config* cfg,
                             gg_match* out) {
  GG_REQUIRE(pred);
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  if (count > 0) GG_REQUIRE(truths);
  return guarded([&] {
    const ggrasp::MetricConfig m{cfg->jaccard_threshold, cfg->angle_threshold};
    m.validate();
    const auto t = to_rects(truths, count);
    const auto r = ggrasp::match_rectangle(to_rect(*pred), t, m);
    *out = {r.matched ? 1 : 0, r.best_jaccard, r.best_angle_difference};
    return GG_OK;
  });
}

gg_status gg_image_to_world(const gg_pose* pose, double depth_at_center, const gg_camera* cam, gg_world_grasp* out) {
  GG_REQUIRE(pose);
  GG_REQUIRE(cam);
  GG_REQUIRE(out);
  return guarded([&] {
    ggrasp::CameraModel c;
    c.fx = cam->fx;
    c.fy = cam->fy;
    c.cx = cam->cx;
    c.cy = cam->cy;
    std::copy(cam->rotation, cam->rotation + 9, c.rotation.begin());
    std::copy(cam->translation, cam->translation + 3, c.translation.begin());
    const auto w = ggrasp::image_to_world(to_pose(*pose), depth_at_center, c);
    *out = {w.position[0], w.position[1], w.position[2], w.yaw, w.width};
    return GG_OK;
  });
}

gg_status gg_config_create(gg_config** out) {
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_config{};
    return GG_OK;
  });
}

void gg_config_destroy(gg_config* cfg) { delete cfg; }

gg_status gg_config_load_file(gg_config* cfg, const char* path) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(path);
  return guarded([&] {
    cfg->cfg.merge_file(path);
    return GG_OK;
  });
}

gg_status gg_config_set(gg_config* cfg, const char* assignment) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(assignment);
  return guarded([&] {
    cfg->cfg.set(std::string(assignment));
    return GG_OK;
  });
}

gg_status gg_config_get(const gg_config* cfg, const char* key, char* buf, size_t capacity, size_t* needed) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(key);
  return guarded([&] { return copy_string(cfg->cfg.get(key), buf, capacity, needed); });
}

gg_status gg_config_canonical(const gg_config* cfg, char* buf, size_t capacity, size_t* needed) {
  GG_REQUIRE(cfg);
  return guarded([&] { return copy_string(cfg->cfg.canonical(), buf, capacity, needed); });
}

gg_status gg_config_hash(const gg_config* cfg, char out[9]) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  return guarded([&] { return copy_string(cfg->cfg.hash_hex(), out, 9, nullptr); });
}

gg_status gg_config_validate(const gg_config* cfg) {
  GG_REQUIRE(cfg);
  return guarded([&] {
    cfg->cfg.validate();
    return GG_OK;
  });
}

gg_status gg_point_quality(const gg_config* cfg, const gg_rect* r, double x, double y, double* out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(r);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = ggrasp::point_quality({x, y}, to_rect(*r), cfg->cfg.encoder());
    return GG_OK;
  });
}

gg_status gg_angle_to_bin(const gg_config* cfg, double theta, int* out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = ggrasp::angle_to_bin(theta, cfg->cfg.encoder());
    return GG_OK;
  });
}

gg_status gg_angle_vector(const gg_config* cfg, double theta, double* out, size_t capacity) {
  GG_REQUIRE(cfg);
  return guarded([&] { return copy_values(ggrasp::angle_quality_vector(theta, cfg->cfg.encoder()).values, out, capacity); });
}

gg_status gg_encode(const gg_config* cfg, const gg_rect* rects, size_t count, int height, int width, gg_maps** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  if (count > 0) GG_REQUIRE(rects);
  return guarded([&] {
    const auto r = to_rects(rects, count);
    *out = new gg_maps{ggrasp::encode(r, height, width, cfg->cfg.encoder())};
    return GG_OK;
  });
}

void gg_maps_destroy(gg_maps* maps) { delete maps; }

gg_status gg_maps_shape(const gg_maps* maps, int* num_bins, int* height, int* width) {
  GG_REQUIRE(maps);
  if (num_bins) *num_bins = maps->maps.num_bins;
  if (height) *height = maps->maps.height;
  if (width) *width = maps->maps.width;
  return GG_OK;
}

gg_status gg_maps_quality(const gg_maps* maps, double* out, size_t capacity) {
  GG_REQUIRE(maps);
  return copy_values(maps->maps.quality, out, capacity);
}

gg_status gg_maps_angle(const gg_maps* maps, double* out, size_t capacity) {
  GG_REQUIRE(maps);
  return copy_values(maps->maps.angle, out, capacity);
}

gg_status gg_maps_width(const gg_maps* maps, double* out, size_t capacity) {
  GG_REQUIRE(maps);
  return copy_values(maps->maps.width_map, out, capacity);
}

gg_status gg_decode(const gg_config* cfg, const gg_maps* maps, gg_pose* out, size_t capacity, size_t* count) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(maps);
  GG_REQUIRE(count);
  if (capacity > 0) GG_REQUIRE(out);
  return guarded([&] {
    *count = 0;
    if (capacity == 0) return GG_OK;
    const auto poses =
        ggrasp::decode(maps->maps, static_cast<int>(capacity), cfg->cfg.encoder(), cfg->cfg.decoder());
    for (const auto& p : poses) out[(*count)++] = from_pose(p);
    return GG_OK;
  });
}

gg_status gg_pose_to_rect(const gg_config* cfg, const gg_pose* pose, gg_rect* out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(pose);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = from_rect(ggrasp::pose_to_rectangle(to_pose(*pose), cfg->cfg.decoder()));
    return GG_OK;
  });
}

gg_status gg_encode_pyramid(const gg_config* cfg, const gg_rect* rects, size_t count, int height, int width,
                            gg_pyramid** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  if (count > 0) GG_REQUIRE(rects);
  return guarded([&] {
    const auto r = to_rects(rects, count);
    *out = new gg_pyramid{ggrasp::encode_pyramid(r, height, width, cfg->cfg.encoder())};
    return GG_OK;
  });
}

void gg_pyramid_destroy(gg_pyramid* p) { delete p; }

size_t gg_pyramid_levels(const gg_pyramid* p) { return p ? p->levels.size() : 0; }

gg_status gg_pyramid_level(const gg_pyramid* p, size_t level, gg_maps** out) {
  GG_REQUIRE(p);
  GG_REQUIRE(out);
  if (level >= p->levels.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "pyramid level out of range");
  return guarded([&] {
    *out = new gg_maps{p->levels[level]};
    return GG_OK;
  });
}

gg_status gg_pyramid_save(const gg_pyramid* p, const gg_config* cfg, const char* path) {
  GG_REQUIRE(p);
  GG_REQUIRE(cfg);
  GG_REQUIRE(path);
  return guarded([&] {
    ggrasp::save_pyramid(path, p->levels, ggrasp::encoder_config_hash(cfg->cfg.encoder()));
    return GG_OK;
  });
}

gg_status gg_pyramid_load(const char* path, gg_pyramid** out) {
  GG_REQUIRE(path);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_pyramid{ggrasp::load_pyramid(path).maps};
    return GG_OK;
  });
}

gg_status gg_dataset_open(const gg_config* cfg, const char* root, gg_dataset** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(root);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_dataset{ggrasp::parse_dataset(cfg->cfg.dataset(), root)};
    return GG_OK;
  });
}

void gg_dataset_destroy(gg_dataset* ds) { delete ds; }

size_t gg_dataset_size(const gg_dataset* ds) { return ds ? ds->ds.size() : 0; }

int gg_dataset_skipped_annotations(const gg_dataset* ds) { return ds ? ds->ds.skipped_annotations() : 0; }

gg_status gg_dataset_sample_id(const gg_dataset* ds, size_t index, char* buf, size_t capacity, size_t* needed) {
  GG_REQUIRE(ds);
  if (index >= ds->ds.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "sample index out of range");
  return copy_string(ds->ds.record(index).source_id, buf, capacity, needed);
}

gg_status gg_dataset_rects(const gg_dataset* ds, size_t index, gg_rect* out, size_t capacity, size_t* count) {
  GG_REQUIRE(ds);
  GG_REQUIRE(count);
  if (index >= ds->ds.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "sample index out of range");
  const auto& rects = ds->ds.record(index).rects;
  *count = rects.size();
  if (!out) return GG_OK;
  if (capacity < rects.size()) return set_error(GG_ERR_BUFFER_TOO_SMALL, "rectangle buffer too small");
  for (size_t i = 0; i < rects.size(); ++i) out[i] = from_rect(rects[i]);
  return GG_OK;
}

gg_status gg_dataset_encode(const gg_config* cfg, const gg_dataset* ds, size_t index, gg_pyramid** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(ds);
  GG_REQUIRE(out);
  if (index >= ds->ds.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "sample index out of range");
  return guarded([&] {
    const auto prepared = ggrasp::prepare_sample(ds->ds.load(index), cfg->cfg.input(), cfg->cfg.encoder());
    *out = new gg_pyramid{prepared.targets};
    return GG_OK;
  });
}

gg_status gg_dataset_split(const gg_config* cfg, const gg_dataset* ds, size_t* train, size_t train_capacity,
                           size_t* train_count, size_t* test, size_t test_capacity, size_t* test_count) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(ds);
  GG_REQUIRE(train_count);
  GG_REQUIRE(test_count);
  return guarded([&] {
    const auto split = ggrasp::make_split(ds->ds, cfg->cfg.split());
    *train_count = split.train.size();
    *test_count = split.test.size();
    if (!train && !test) return GG_OK;
    if ((train && train_capacity < split.train.size()) || (test && test_capacity < split.test.size()))
      return set_error(GG_ERR_BUFFER_TOO_SMALL, "split buffer too small");
    if (train) std::copy(split.train.begin(), split.train.end(), train);
    if (test) std::copy(split.test.begin(), split.test.end(), test);
    return GG_OK;
  });
}

gg_status gg_write_fixture(const char* root, const char* kind, int count, uint64_t seed) {
  GG_REQUIRE(root);
  GG_REQUIRE(kind);
  return guarded([&] {
    ggrasp::FixtureSpec spec;
    const std::string k = kind;
    if (k == "cornell") {
      spec.kind = ggrasp::DatasetKind::kCornell;
    } else if (k == "jacquard") {
      spec.kind = ggrasp::DatasetKind::kJacquard;
    } else {
      return set_error(GG_ERR_INVALID_ARGUMENT, "fixture kind must be cornell or jacquard");
    }
    spec.count = count;
    spec.seed = seed;
    ggrasp::write_fixture(root, spec);
    return GG_OK;
  });
}

gg_status gg_network_create(const gg_config* cfg, gg_network** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_network{ggrasp::GraspNetwork(cfg->cfg.network())};
    return GG_OK;
  });
}

gg_status gg_network_load(const char* checkpoint, gg_network** out) {
  GG_REQUIRE(checkpoint);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_network{ggrasp::load_checkpoint(checkpoint)};
    return GG_OK;
  });
}

gg_status gg_network_save(const gg_network* net, const char* checkpoint) {
  GG_REQUIRE(net);
  GG_REQUIRE(checkpoint);
  return guarded([&] {
    ggrasp::save_checkpoint(checkpoint, net->net);
    return GG_OK;
  });
}

void gg_network_destroy(gg_network* net) { delete net; }

size_t gg_network_parameter_count(const gg_network* net) { return net ? net->net.parameter_count() : 0; }

int gg_network_head_channels(const gg_network* net) { return net ? net->net.config().head_channels() : 0; }

gg_status gg_network_forward(const gg_network* net, const double* input, int n, int size, double* head0,
                             double* head1, double* head2) {
  GG_REQUIRE(net);
  GG_REQUIRE(input);
  if (n <= 0 || size <= 0) return set_error(GG_ERR_INVALID_ARGUMENT, "batch and size must be positive");
  return guarded([&] {
    ggrasp::nn::NoGradGuard no_grad;
    ggrasp::nn::Tensor x(ggrasp::nn::Shape{n, net->net.config().input_channels, size, size});
    std::copy(input, input + x.size(), x.data.begin());
    const auto y = net->net.forward(ggrasp::nn::Var(std::move(x)));
    double* outs[3] = {head0, head1, head2};
    for (int i = 0; i < 3; ++i)
      if (outs[i]) std::copy(y.heads[i].value().data.begin(), y.heads[i].value().data.end(), outs[i]);
    return GG_OK;
  });
}

gg_status gg_train(const gg_config* cfg, const gg_dataset* ds, gg_network* net, const char* out_dir,
                   gg_train_summary* summary) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(ds);
  GG_REQUIRE(net);
  return guarded([&] {
    const auto split = ggrasp::make_split(ds->ds, cfg->cfg.split());
    auto opts = cfg->cfg.train_options(out_dir ? out_dir : "");
    opts.verbose = true;
    const auto r = ggrasp::train(net->net, ds->ds, split, cfg->cfg.train(), opts);
    if (summary) {
      summary->steps = r.steps;
      summary->epochs = static_cast<int>(r.epochs.size());
      summary->initial_loss = r.step_losses.empty() ? 0.0 : r.step_losses.front();
      summary->final_loss = r.step_losses.empty() ? 0.0 : r.step_losses.back();
      summary->final_lr = r.final_lr;
      summary->best_val_accuracy = r.best_val_accuracy;
    }
    return GG_OK;
  });
}

gg_status gg_predict(const gg_config* cfg, const gg_network* net, const gg_dataset* ds, gg_predictions** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(net);
  GG_REQUIRE(ds);
  GG_REQUIRE(out);
  return guarded([&] {
    const auto& c = cfg->cfg;
    const int warmup = std::stoi(c.get("eval.warmup"));
    *out = new gg_predictions{
        ggrasp::predict(net->net, ds->ds, eval_indices(c, ds->ds), c.input(), c.encoder(), c.decoder(), warmup)};
    return GG_OK;
  });
}

void gg_predictions_destroy(gg_predictions* p) { delete p; }

gg_status gg_predictions_save(const gg_predictions* p, const char* path) {
  GG_REQUIRE(p);
  GG_REQUIRE(path);
  return guarded([&] {
    ggrasp::save_predictions(path, p->set);
    return GG_OK;
  });
}

gg_status gg_predictions_load(const char* path, gg_predictions** out) {
  GG_REQUIRE(path);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_predictions{ggrasp::load_predictions(path)};
    return GG_OK;
  });
}

size_t gg_predictions_count(const gg_predictions* p) { return p ? p->set.items.size() : 0; }

gg_status gg_predictions_get(const gg_predictions* p, size_t index, gg_pose* pose, int* valid) {
  GG_REQUIRE(p);
  if (index >= p->set.items.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "prediction index out of range");
  const auto& item = p->set.items[index];
  if (pose) *pose = from_pose(item.pose);
  if (valid) *valid = item.valid ? 1 : 0;
  return GG_OK;
}

double gg_predictions_mean_ms(const gg_predictions* p) { return p ? p->set.mean_inference_ms : 0.0; }

gg_status gg_evaluate(const gg_config* cfg, const gg_predictions* p, const gg_dataset* ds, gg_eval_result** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(p);
  GG_REQUIRE(ds);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = new gg_eval_result{ggrasp::evaluate(p->set, ds->ds, eval_indices(cfg->cfg, ds->ds), cfg->cfg.metric())};
    return GG_OK;
  });
}

void gg_eval_result_destroy(gg_eval_result* r) { delete r; }

double gg_eval_accuracy(const gg_eval_result* r) { return r ? r->result.accuracy : 0.0; }

gg_status gg_eval_counts(const gg_eval_result* r, int* matched, int* samples) {
  GG_REQUIRE(r);
  if (matched) *matched = r->result.matched;
  if (samples) *samples = r->result.samples;
  return GG_OK;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) ggrasp::fail(ggrasp::ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  if (!f) ggrasp::fail(ggrasp::ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace

gg_status gg_eval_write(const gg_eval_result* r, const char* dir) {
  GG_REQUIRE(r);
  GG_REQUIRE(dir);
  return guarded([&] {
    const std::filesystem::path d(dir);
    std::filesystem::create_directories(d);
    write_text(d / "result.json", ggrasp::eval_result_json(r->result));
    write_text(d / "result.csv", ggrasp::eval_result_csv(r->result));
    return GG_OK;
  });
}

gg_status gg_sweep(const gg_config* cfg, const gg_predictions* p, const gg_dataset* ds, gg_sweep_result** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(p);
  GG_REQUIRE(ds);
  GG_REQUIRE(out);
  return guarded([&] {
    const auto& c = cfg->cfg;
    *out = new gg_sweep_result{
        ggrasp::sweep(p->set, ds->ds, eval_indices(c, ds->ds), c.sweep_jaccard(), c.sweep_angles())};
    return GG_OK;
  });
}

void gg_sweep_result_destroy(gg_sweep_result* s) { delete s; }

gg_status gg_sweep_accuracy(const gg_sweep_result* s, double jaccard, double angle, double* out) {
  GG_REQUIRE(s);
  GG_REQUIRE(out);
  return guarded([&] {
    *out = s->result.at(jaccard, angle);
    return GG_OK;
  });
}

gg_status gg_sweep_write(const gg_sweep_result* s, const char* dir) {
  GG_REQUIRE(s);
  GG_REQUIRE(dir);
  return guarded([&] {
    const std::filesystem::path d(dir);
    std::filesystem::create_directories(d);
    write_text(d / "sweep.json", ggrasp::sweep_result_json(s->result));
    write_text(d / "sweep_grid.csv", ggrasp::sweep_csv(s->result.grid));
    write_text(d / "sweep_jaccard.csv", ggrasp::sweep_csv(s->result.jaccard_curve));
    write_text(d / "sweep_angle.csv", ggrasp::sweep_csv(s->result.angle_curve));
    return GG_OK;
  });
}

gg_status gg_ablate(const gg_config* cfg, const gg_dataset* ds, const char* out_dir, gg_ablation** out) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(ds);
  GG_REQUIRE(out);
  return guarded([&] {
    const auto& c = cfg->cfg;
    ggrasp::AblationSettings s;
    s.network = c.network();
    s.train = c.train();
    s.options = c.train_options(out_dir ? out_dir : "");
    s.options.verbose = true;
    s.jaccard_list = c.sweep_jaccard();
    s.angle_list = c.sweep_angles();
    const std::vector<ggrasp::AblationVariant> variants = {{true, true}, {false, true}, {true, false}, {false, false}};
    *out = new gg_ablation{ggrasp::ablate(ds->ds, ggrasp::make_split(ds->ds, c.split()), variants, s)};
    return GG_OK;
  });
}

void gg_ablation_destroy(gg_ablation* a) { delete a; }

size_t gg_ablation_count(const gg_ablation* a) { return a ? a->rows.size() : 0; }

gg_status gg_ablation_row(const gg_ablation* a, size_t index, int* ggt, int* glff, double* accuracy) {
  GG_REQUIRE(a);
  if (index >= a->rows.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "ablation row out of range");
  const auto& row = a->rows[index];
  if (ggt) *ggt = row.variant.ggt ? 1 : 0;
  if (glff) *glff = row.variant.glff ? 1 : 0;
  if (accuracy) *accuracy = row.at_defaults.accuracy;
  return GG_OK;
}

gg_status gg_ablation_write(const gg_ablation* a, const char* dir) {
  GG_REQUIRE(a);
  GG_REQUIRE(dir);
  return guarded([&] {
    const std::filesystem::path d(dir);
    std::filesystem::create_directories(d);
    write_text(d / "ablation.json", ggrasp::ablation_json(a->rows));
    write_text(d / "ablation.csv", ggrasp::ablation_csv(a->rows));
    return GG_OK;
  });
}

gg_status gg_visualize(const gg_config* cfg, const gg_dataset* ds, size_t index, const gg_network* net,
                       const char* out_dir) {
  GG_REQUIRE(cfg);
  GG_REQUIRE(ds);
  GG_REQUIRE(out_dir);
  if (index >= ds->ds.size()) return set_error(GG_ERR_INVALID_ARGUMENT, "sample index out of range");
  return guarded([&] {
    const auto& c = cfg->cfg;
    const auto prepared = ggrasp::prepare_sample(ds->ds.load(index), c.input(), c.encoder());
    ggrasp::GraspMaps maps = prepared.targets.back();
    if (net) {
      ggrasp::nn::NoGradGuard no_grad;
      const auto y = net->net.forward(ggrasp::nn::Var(ggrasp::stack_inputs({&prepared.input})));
      maps = ggrasp::head_to_maps(y.heads[2].value(), 0, 1.0);
    }
    const int s = prepared.input.size;
    ggrasp::RgbImage rgb(s, s);
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < s * s; ++i)
        rgb.data[static_cast<std::size_t>(i) * 3 + ch] = static_cast<std::uint8_t>(
            std::lround(std::clamp(prepared.input.data[static_cast<std::size_t>(ch) * s * s + i], 0.0, 1.0) * 255.0));
    std::vector<ggrasp::GraspRectangle> rects;
    const auto poses = ggrasp::decode(maps, 1, c.encoder(), c.decoder());
    if (!poses.empty() && poses[0].width > 0.0) rects.push_back(ggrasp::pose_to_rectangle(poses[0], c.decoder()));
    ggrasp::write_visualization(out_dir, rgb, maps, rects);
    return GG_OK;
  });
}

}  // extern "C"

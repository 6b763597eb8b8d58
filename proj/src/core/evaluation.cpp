#include "evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace ggrasp {

using nlohmann::json;

const Prediction* PredictionSet::find(const std::string& source_id) const {
  for (const auto& p : items)
    if (p.source_id == source_id) return &p;
  return nullptr;
}

PredictionSet predict_inputs(const GraspNetwork& net, const std::vector<std::string>& ids,
                             const std::vector<NetworkInput>& inputs, const EncoderConfig& enc,
                             const DecoderConfig& dec, int warmup) {
  if (ids.size() != inputs.size()) fail(ErrorCode::kInvalidArgument, "predict: ids and inputs differ in length");
  if (warmup < 0) fail(ErrorCode::kInvalidArgument, "predict: warmup must be >= 0");
  nn::NoGradGuard no_grad;
  PredictionSet out;
  out.warmup = warmup;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const nn::Var x(stack_inputs({&inputs[i]}));
    const NetworkOutput y = net.forward(x);
    const auto poses = decode_head(y.heads[2].value(), 0, 1, enc, dec);
    const auto t1 = std::chrono::steady_clock::now();
    Prediction p;
    p.source_id = ids[i];
    p.inference_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (!poses.empty() && poses[0].width > 0.0) {
      p.valid = true;
      p.pose = inputs[i].transform.pose_to_image(poses[0]);
      p.rect = pose_to_rectangle(p.pose, dec);
    }
    out.items.push_back(p);
  }
  // Small sets have nothing left after warmup; average them all instead.
  const std::size_t skip = out.items.size() > static_cast<std::size_t>(warmup) ? warmup : 0;
  double sum = 0.0;
  for (std::size_t i = skip; i < out.items.size(); ++i) sum += out.items[i].inference_ms;
  if (out.items.size() > skip) out.mean_inference_ms = sum / static_cast<double>(out.items.size() - skip);
  return out;
}

PredictionSet predict(const GraspNetwork& net, const Dataset& dataset, const std::vector<std::size_t>& indices,
                      const InputConfig& input, const EncoderConfig& enc, const DecoderConfig& dec, int warmup) {
  input.validate();
  if (indices.empty()) fail(ErrorCode::kInvalidArgument, "predict: empty sample list");
  std::vector<std::string> ids;
  std::vector<NetworkInput> inputs;
  for (std::size_t i : indices) {
    const GraspSample s = dataset.load(i);
    ids.push_back(s.source_id);
    inputs.push_back(to_network_input(s, input.size, input.crop));
  }
  return predict_inputs(net, ids, inputs, enc, dec, warmup);
}

namespace {

json pose_json(const GraspPose& g) {
  return {{"x", g.center.x}, {"y", g.center.y}, {"angle", g.angle}, {"width", g.width}, {"quality", g.quality}};
}

GraspPose pose_from(const json& j) {
  GraspPose g;
  g.center = {j.at("x").get<double>(), j.at("y").get<double>()};
  g.angle = j.at("angle").get<double>();
  g.width = j.at("width").get<double>();
  g.quality = j.at("quality").get<double>();
  return g;
}

json rect_json(const GraspRectangle& r) {
  return {{"x", r.center().x}, {"y", r.center().y}, {"angle", r.angle()}, {"width", r.width()}, {"height", r.height()}};
}

GraspRectangle rect_from(const json& j) {
  return GraspRectangle({j.at("x").get<double>(), j.at("y").get<double>()}, j.at("angle").get<double>(),
                        j.at("width").get<double>(), j.at("height").get<double>());
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr double kDeg = kPi / 180.0;

// Thresholds in degrees, rounded so 30 prints as 30 rather than 29.999999999999996.
double degrees(double radians) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", radians / kDeg);
  return std::strtod(buf, nullptr);
}

// Jaccard and angle difference of a prediction against each truth.
struct TruthPairs {
  bool valid = false;
  std::vector<std::pair<double, double>> pairs;
};

std::vector<TruthPairs> pair_table(const PredictionSet& preds, const std::vector<std::vector<GraspRectangle>>& truths) {
  if (preds.items.size() != truths.size()) fail(ErrorCode::kInvalidArgument, "prediction and truth counts differ");
  if (preds.items.empty()) fail(ErrorCode::kInvalidArgument, "evaluation needs a non-empty test split");
  std::vector<TruthPairs> table(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].empty()) fail(ErrorCode::kNoGroundTruth, "no ground truth for " + preds.items[i].source_id);
    const Prediction& p = preds.items[i];
    if (!p.valid) continue;
    table[i].valid = true;
    for (const auto& t : truths[i])
      table[i].pairs.emplace_back(jaccard(p.rect, t), angle_difference(p.rect.angle(), t.angle()));
  }
  return table;
}

double accuracy_of(const std::vector<TruthPairs>& table, const MetricConfig& cfg) {
  int hits = 0;
  for (const auto& row : table) {
    for (const auto& [j, d] : row.pairs) {
      if (j > cfg.jaccard_threshold && d < cfg.angle_threshold) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(table.size());
}

}  // namespace

void save_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  json items = json::array();
  for (const auto& p : preds.items) {
    json j = {{"source_id", p.source_id}, {"valid", p.valid}, {"inference_ms", p.inference_ms}};
    if (p.valid) {
      j["pose"] = pose_json(p.pose);
      j["rect"] = rect_json(p.rect);
    }
    items.push_back(j);
  }
  const json doc = {{"format", "ggrasp-predictions-1"},
                    {"mean_inference_ms", preds.mean_inference_ms},
                    {"warmup", preds.warmup},
                    {"items", items}};
  std::ofstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  f << doc.dump(1) << '\n';
  if (!f) fail(ErrorCode::kIo, "write failed: " + path.string());
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot read prediction cache " + path.string());
  PredictionSet out;
  try {
    const json doc = json::parse(f);
    if (doc.at("format") != "ggrasp-predictions-1") fail(ErrorCode::kFormat, "unknown prediction cache format");
    out.mean_inference_ms = doc.at("mean_inference_ms").get<double>();
    out.warmup = doc.at("warmup").get<int>();
    for (const auto& j : doc.at("items")) {
      Prediction p;
      p.source_id = j.at("source_id").get<std::string>();
      p.valid = j.at("valid").get<bool>();
      p.inference_ms = j.at("inference_ms").get<double>();
      if (p.valid) {
        p.pose = pose_from(j.at("pose"));
        p.rect = rect_from(j.at("rect"));
      }
      out.items.push_back(p);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "malformed prediction cache " + path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::vector<GraspRectangle>> truths_for(const PredictionSet& preds, const Dataset& dataset,
                                                    const std::vector<std::size_t>& indices) {
  if (indices.size() != preds.items.size())
    fail(ErrorCode::kInvalidArgument, "prediction cache holds " + std::to_string(preds.items.size()) +
                                          " samples but the split has " + std::to_string(indices.size()));
  std::vector<std::vector<GraspRectangle>> truths;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const SampleRecord& rec = dataset.record(indices[k]);
    if (preds.items[k].source_id != rec.source_id)
      fail(ErrorCode::kInvalidArgument,
           "prediction " + preds.items[k].source_id + " does not match split sample " + rec.source_id);
    truths.push_back(rec.rects);
  }
  return truths;
}

EvalResult evaluate(const PredictionSet& preds, const std::vector<std::vector<GraspRectangle>>& truths,
                    const MetricConfig& cfg) {
  cfg.validate();
  const auto table = pair_table(preds, truths);
  EvalResult r;
  r.config = cfg;
  r.samples = static_cast<int>(truths.size());
  r.mean_inference_ms = preds.mean_inference_ms;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const Prediction& p = preds.items[i];
    SampleScore s;
    s.source_id = p.source_id;
    s.valid = p.valid;
    s.pose = p.pose;
    if (p.valid) {
      const MetricMatch m = match_rectangle(p.rect, truths[i], cfg);
      s.matched = m.matched;
      s.best_jaccard = m.best_jaccard;
      s.best_angle_difference = m.best_angle_difference;
    } else {
      s.best_angle_difference = kPi / 2.0;
    }
    if (s.matched) ++r.matched;
    r.per_sample.push_back(s);
  }
  r.accuracy = accuracy_of(table, cfg);
  if (r.accuracy != static_cast<double>(r.matched) / r.samples)
    fail(ErrorCode::kInvalidArgument, "internal scoring mismatch");
  return r;
}

EvalResult evaluate(const PredictionSet& preds, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const MetricConfig& cfg) {
  return evaluate(preds, truths_for(preds, dataset, indices), cfg);
}

double SweepResult::at(double jaccard, double angle) const {
  for (const auto& p : grid)
    if (p.config.jaccard_threshold == jaccard && p.config.angle_threshold == angle) return p.accuracy;
  fail(ErrorCode::kInvalidArgument, "threshold pair not in sweep grid");
}

SweepResult sweep(const PredictionSet& preds, const std::vector<std::vector<GraspRectangle>>& truths,
                  const std::vector<double>& jaccard_list, const std::vector<double>& angle_list) {
  if (jaccard_list.empty() || angle_list.empty()) fail(ErrorCode::kInvalidArgument, "sweep: empty threshold list");
  const auto table = pair_table(preds, truths);
  SweepResult s;
  s.jaccard_list = jaccard_list;
  s.angle_list = angle_list;
  auto point = [&](double j, double a) {
    MetricConfig cfg{j, a};
    cfg.validate();
    return SweepPoint{cfg, accuracy_of(table, cfg)};
  };
  const MetricConfig defaults;
  for (double j : jaccard_list)
    for (double a : angle_list) s.grid.push_back(point(j, a));
  for (double j : jaccard_list) s.jaccard_curve.push_back(point(j, defaults.angle_threshold));
  for (double a : angle_list) s.angle_curve.push_back(point(defaults.jaccard_threshold, a));
  return s;
}

SweepResult sweep(const PredictionSet& preds, const Dataset& dataset, const std::vector<std::size_t>& indices,
                  const std::vector<double>& jaccard_list, const std::vector<double>& angle_list) {
  return sweep(preds, truths_for(preds, dataset, indices), jaccard_list, angle_list);
}

std::string AblationVariant::name() const {
  return std::string("ggt-") + (ggt ? "on" : "off") + "_glff-" + (glff ? "on" : "off");
}

std::vector<AblationRow> ablate(const Dataset& dataset, const Split& split, const std::vector<AblationVariant>& variants,
                                const AblationSettings& settings) {
  if (variants.empty()) fail(ErrorCode::kInvalidArgument, "ablate: no variants");
  if (split.test.empty()) fail(ErrorCode::kInvalidArgument, "ablate: empty test split");
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    NetworkConfig net_cfg = settings.network;
    net_cfg.glff = v.glff;
    TrainOptions opts = settings.options;
    opts.encoder.mode = v.ggt ? EncodingMode::kGaussian : EncodingMode::kUniform;
    if (!opts.out_dir.empty()) opts.out_dir = settings.options.out_dir / v.name();
    GraspNetwork net(net_cfg);
    const TrainResult tr = train(net, dataset, split, settings.train, opts);
    const PredictionSet preds = predict(net, dataset, split.test, opts.input, opts.encoder, opts.decoder, 0);
    AblationRow row;
    row.variant = v;
    row.at_defaults = evaluate(preds, dataset, split.test, MetricConfig{});
    row.sweep = sweep(preds, dataset, split.test, settings.jaccard_list, settings.angle_list);
    row.final_loss = tr.step_losses.empty() ? 0.0 : tr.step_losses.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json metric_json(const MetricConfig& c) {
  return {{"jaccard_threshold", c.jaccard_threshold}, {"angle_threshold_deg", degrees(c.angle_threshold)}};
}

json points_json(const std::vector<SweepPoint>& pts) {
  json a = json::array();
  for (const auto& p : pts)
    a.push_back({{"jaccard", p.config.jaccard_threshold},
                 {"angle_deg", degrees(p.config.angle_threshold)},
                 {"accuracy", p.accuracy}});
  return a;
}

json eval_json(const EvalResult& r) {
  json samples = json::array();
  for (const auto& s : r.per_sample) {
    json j = {{"source_id", s.source_id},
              {"valid", s.valid},
              {"matched", s.matched},
              {"best_jaccard", s.best_jaccard},
              {"best_angle_diff_rad", s.best_angle_difference}};
    if (s.valid) j["pose"] = pose_json(s.pose);
    samples.push_back(j);
  }
  return {{"accuracy", r.accuracy},       {"matched", r.matched},
          {"samples", r.samples},         {"config", metric_json(r.config)},
          {"mean_inference_ms", r.mean_inference_ms}, {"per_sample", samples}};
}

json sweep_json(const SweepResult& s) {
  return {{"grid", points_json(s.grid)},
          {"jaccard_curve", points_json(s.jaccard_curve)},
          {"angle_curve", points_json(s.angle_curve)}};
}

}  // namespace

std::string eval_result_json(const EvalResult& r) { return eval_json(r).dump(2) + "\n"; }

std::string eval_result_csv(const EvalResult& r) {
  std::ostringstream o;
  o << "jaccard,angle_deg,accuracy,matched,samples,mean_inference_ms\n";
  o << num(r.config.jaccard_threshold) << ',' << num(degrees(r.config.angle_threshold)) << ',' << num(r.accuracy) << ','
    << r.matched << ',' << r.samples << ',' << num(r.mean_inference_ms) << '\n';
  return o.str();
}

std::string sweep_result_json(const SweepResult& s) { return sweep_json(s).dump(2) + "\n"; }

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream o;
  o << "jaccard,angle_deg,accuracy\n";
  for (const auto& p : points)
    o << num(p.config.jaccard_threshold) << ',' << num(degrees(p.config.angle_threshold)) << ',' << num(p.accuracy)
      << '\n';
  return o.str();
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  json a = json::array();
  for (const auto& r : rows)
    a.push_back({{"variant", r.variant.name()},
                 {"ggt", r.variant.ggt},
                 {"glff", r.variant.glff},
                 {"final_loss", r.final_loss},
                 {"accuracy_at_defaults", r.at_defaults.accuracy},
                 {"sweep", sweep_json(r.sweep)}});
  return a.dump(2) + "\n";
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream o;
  o << "variant,jaccard,angle_deg,accuracy\n";
  for (const auto& r : rows)
    for (const auto& p : r.sweep.grid)
      o << r.variant.name() << ',' << num(p.config.jaccard_threshold) << ',' << num(degrees(p.config.angle_threshold))
        << ',' << num(p.accuracy) << '\n';
  return o.str();
}

}  // namespace ggrasp

#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"
#include "random.hpp"

namespace ggrasp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
  fail(ErrorCode::kConfig, "config key '" + key + "': cannot parse '" + value + "' as " + want);
}

// Independent seeds for the split, the weights and the training stream.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t which) {
  Rng rng = derived_rng(seed, 0x5EED000000000000ULL + which);
  return rng();
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::schema() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"dataset", "cornell"},
      {"data_root", ""},
      {"seed", "0"},
      {"input.size", "320"},
      {"input.crop", "0"},
      {"split.mode", "image"},
      {"split.train_fraction", "auto"},
      {"split.folds", "1"},
      {"split.fold", "0"},
      {"encoder.K", "18"},
      {"encoder.th", "3"},
      {"encoder.sigma_a", "1.5"},
      {"encoder.min_quality", "0.5"},
      {"encoder.center_fraction", "0.333333333333333333"},
      {"encoder.mode", "gaussian"},
      {"encoder.width_norm", "150"},
      {"decoder.blur_sigma", "2"},
      {"decoder.blur_window", "11"},
      {"decoder.min_distance", "10"},
      {"decoder.height_ratio", "0.5"},
      {"network.base_channels", "32"},
      {"network.glff", "true"},
      {"network.deformable", "true"},
      {"train.lr", "0.001"},
      {"train.epochs", "60"},
      {"train.batch_size", "8"},
      {"train.plateau_patience", "10"},
      {"train.plateau_window", "10"},
      {"train.plateau_tolerance", "0.001"},
      {"train.lr_decay", "0.1"},
      {"train.smooth_l1_sigma", "1"},
      {"train.augmentations", "auto"},
      {"train.max_steps", "0"},
      {"train.eval_every", "1"},
      {"metric.jaccard", "0.25"},
      {"metric.angle_deg", "30"},
      {"sweep.jaccard_list", "0.25,0.30,0.35,0.40,0.45"},
      {"sweep.angle_list_deg", "30,25,20,15,10"},
      {"eval.warmup", "10"},
      {"eval.split", "test"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : schema()) {
    values_[k] = v;
    explicit_[k] = false;
  }
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> unknown;
  std::vector<std::pair<std::string, std::string>> assignments;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!values_.count(key)) {
      unknown.push_back(key);
      continue;
    }
    assignments.emplace_back(key, value);
  }
  if (!unknown.empty()) {
    std::string msg = origin + ": unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    fail(ErrorCode::kConfig, msg);
  }
  for (const auto& [k, v] : assignments) set(k, v);
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCode::kConfig, "expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) fail(ErrorCode::kConfig, "unknown config keys: " + key);
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::kConfig, "unknown config keys: " + key);
  return it->second;
}

bool RunConfig::is_set_explicitly(const std::string& key) const { return explicit_.at(key); }

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return io::fnv1a64(canonical()); }

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return std::string(buf, 8);
}

double RunConfig::real(const std::string& key) const {
  const std::string& v = get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a real number");
  return out;
}

long long RunConfig::integer(const std::string& key) const {
  const std::string& v = get(key);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool RunConfig::boolean(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad_value(key, v, "a boolean (true/false)");
}

std::vector<double> RunConfig::real_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<double> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) bad_value(key, v, "a comma-separated list of reals");
    out.push_back(x);
  }
  if (out.empty()) bad_value(key, v, "a non-empty list");
  return out;
}

DatasetKind RunConfig::dataset() const {
  const std::string& v = get("dataset");
  if (v == "cornell") return DatasetKind::kCornell;
  if (v == "jacquard") return DatasetKind::kJacquard;
  bad_value("dataset", v, "cornell or jacquard");
}

std::filesystem::path RunConfig::data_root() const { return get("data_root"); }

std::uint64_t RunConfig::seed() const {
  const long long s = integer("seed");
  if (s < 0) bad_value("seed", get("seed"), "a non-negative integer");
  return static_cast<std::uint64_t>(s);
}

InputConfig RunConfig::input() const {
  InputConfig c;
  c.size = static_cast<int>(integer("input.size"));
  c.crop = static_cast<int>(integer("input.crop"));
  return c;
}

SplitSpec RunConfig::split() const {
  SplitSpec s;
  const std::string& m = get("split.mode");
  if (m == "image") {
    s.mode = SplitMode::kImageWise;
  } else if (m == "object") {
    s.mode = SplitMode::kObjectWise;
  } else {
    bad_value("split.mode", m, "image or object");
  }
  // auto: 0.9 for Cornell, 5:1 for Jacquard.
  if (get("split.train_fraction") == "auto") {
    s.train_fraction = dataset() == DatasetKind::kCornell ? 0.9 : 5.0 / 6.0;
  } else {
    s.train_fraction = real("split.train_fraction");
  }
  s.folds = static_cast<int>(integer("split.folds"));
  s.fold = static_cast<int>(integer("split.fold"));
  s.seed = sub_seed(seed(), 1);
  return s;
}

EncoderConfig RunConfig::encoder() const {
  EncoderConfig e;
  e.num_bins = static_cast<int>(integer("encoder.K"));
  e.bin_tolerance = static_cast<int>(integer("encoder.th"));
  e.sigma_angle = real("encoder.sigma_a");
  e.min_quality = real("encoder.min_quality");
  e.center_fraction = real("encoder.center_fraction");
  const std::string& m = get("encoder.mode");
  if (m == "gaussian") {
    e.mode = EncodingMode::kGaussian;
  } else if (m == "uniform") {
    e.mode = EncodingMode::kUniform;
  } else {
    bad_value("encoder.mode", m, "gaussian or uniform");
  }
  e.width_norm = real("encoder.width_norm");
  e.validate();
  return e;
}

DecoderConfig RunConfig::decoder() const {
  DecoderConfig d;
  d.blur_sigma = real("decoder.blur_sigma");
  d.blur_window = static_cast<int>(integer("decoder.blur_window"));
  d.min_distance = static_cast<int>(integer("decoder.min_distance"));
  d.height_ratio = real("decoder.height_ratio");
  d.validate();
  return d;
}

NetworkConfig RunConfig::network() const {
  NetworkConfig n;
  n.base_channels = static_cast<int>(integer("network.base_channels"));
  n.glff = boolean("network.glff");
  n.deformable = boolean("network.deformable");
  n.num_bins = static_cast<int>(integer("encoder.K"));
  n.seed = sub_seed(seed(), 2);
  n.validate();
  return n;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.lr_initial = real("train.lr");
  t.epochs = static_cast<int>(integer("train.epochs"));
  t.batch_size = static_cast<int>(integer("train.batch_size"));
  t.plateau_patience = static_cast<int>(integer("train.plateau_patience"));
  t.plateau_window = static_cast<int>(integer("train.plateau_window"));
  t.plateau_tolerance = real("train.plateau_tolerance");
  t.lr_decay_factor = real("train.lr_decay");
  t.smooth_l1_sigma = real("train.smooth_l1_sigma");
  if (get("train.augmentations") == "auto") {
    t.augmentations = -1;
  } else {
    t.augmentations = static_cast<int>(integer("train.augmentations"));
    if (t.augmentations < 0) bad_value("train.augmentations", get("train.augmentations"), "auto or >= 0");
  }
  t.max_steps = static_cast<int>(integer("train.max_steps"));
  t.eval_every = static_cast<int>(integer("train.eval_every"));
  t.seed = sub_seed(seed(), 3);
  t.validate();
  return t;
}

MetricConfig RunConfig::metric() const {
  MetricConfig m{real("metric.jaccard"), real("metric.angle_deg") * kPi / 180.0};
  m.validate();
  return m;
}

std::vector<double> RunConfig::sweep_jaccard() const { return real_list("sweep.jaccard_list"); }

std::vector<double> RunConfig::sweep_angles() const {
  auto v = real_list("sweep.angle_list_deg");
  for (double& a : v) a *= kPi / 180.0;
  return v;
}

TrainOptions RunConfig::train_options(const std::filesystem::path& out_dir) const {
  TrainOptions o;
  o.input = input();
  o.encoder = encoder();
  o.decoder = decoder();
  o.metric = metric();
  o.out_dir = out_dir;
  return o;
}

void RunConfig::validate() const {
  dataset();
  input().validate();
  split();
  encoder();
  decoder();
  network();
  train();
  metric();
  for (double j : sweep_jaccard()) MetricConfig{j, kPi / 6.0}.validate();
  for (double a : sweep_angles()) MetricConfig{0.25, a}.validate();
  if (integer("eval.warmup") < 0) bad_value("eval.warmup", get("eval.warmup"), "a non-negative integer");
  const std::string& s = get("eval.split");
  if (s != "test" && s != "train" && s != "all") bad_value("eval.split", s, "test, train or all");
}

}  // namespace ggrasp

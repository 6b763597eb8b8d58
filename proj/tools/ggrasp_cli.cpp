#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ggrasp/ggrasp.h"

namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(gg_status s) {
  if (s != GG_OK) throw Failure(std::string(gg_status_name(s)) + ": " + gg_last_error());
}

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Config = Handle<gg_config, gg_config_destroy>;
using Dataset = Handle<gg_dataset, gg_dataset_destroy>;
using Network = Handle<gg_network, gg_network_destroy>;
using Predictions = Handle<gg_predictions, gg_predictions_destroy>;
using EvalResult = Handle<gg_eval_result, gg_eval_result_destroy>;
using SweepResult = Handle<gg_sweep_result, gg_sweep_result_destroy>;
using Ablation = Handle<gg_ablation, gg_ablation_destroy>;
using Pyramid = Handle<gg_pyramid, gg_pyramid_destroy>;

std::string config_get(const gg_config* cfg, const std::string& key) {
  size_t needed = 0;
  check(gg_config_get(cfg, key.c_str(), nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(gg_config_get(cfg, key.c_str(), buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string canonical(const gg_config* cfg) {
  size_t needed = 0;
  check(gg_config_canonical(cfg, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(gg_config_canonical(cfg, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string sample_id(const gg_dataset* ds, size_t i) {
  size_t needed = 0;
  check(gg_dataset_sample_id(ds, i, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(gg_dataset_sample_id(ds, i, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
  if (!f) throw Failure("cannot write " + path.string());
}

// Options shared by every pipeline command.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string data_root;
  std::string seed;
  std::string out = "runs";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_file, "flat key = value config file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.sets, "override one config key (key=value); repeatable");
  app->add_option("--data-root", c.data_root, "dataset root (default: data_root key, then $GRASP_DATA_ROOT)");
  app->add_option("--seed", c.seed, "run seed");
  app->add_option("-o,--out", c.out, "parent directory for run directories")->capture_default_str();
}

struct Run {
  Config cfg;
  fs::path dir;
  std::string data_root;
};

// Defaults, then the config file, then --set and the dedicated flags.
void load_config(Run& run, const Common& c) {
  check(gg_config_create(run.cfg.out()));
  if (!c.config_file.empty()) check(gg_config_load_file(run.cfg.get(), c.config_file.c_str()));
  for (const auto& s : c.sets) check(gg_config_set(run.cfg.get(), s.c_str()));
  if (!c.seed.empty()) check(gg_config_set(run.cfg.get(), ("seed=" + c.seed).c_str()));
  if (!c.data_root.empty()) check(gg_config_set(run.cfg.get(), ("data_root=" + c.data_root).c_str()));
  check(gg_config_validate(run.cfg.get()));
  run.data_root = config_get(run.cfg.get(), "data_root");
  if (run.data_root.empty()) {
    const char* env = std::getenv("GRASP_DATA_ROOT");
    if (env) run.data_root = env;
  }
}

void start_run(Run& run, const Common& c, const std::string& command, int argc, char** argv) {
  load_config(run, c);
  char hash[9];
  check(gg_config_hash(run.cfg.get(), hash));
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::gmtime(&now));
  fs::path dir = fs::path(c.out) / (std::string("run-") + stamp + "-" + hash);
  for (int k = 1; fs::exists(dir); ++k) dir = fs::path(c.out) / (std::string("run-") + stamp + "-" + hash + "." + std::to_string(k));
  fs::create_directories(dir);
  run.dir = dir;
  write_file(dir / "config.txt", canonical(run.cfg.get()));
  if (!c.config_file.empty()) fs::copy_file(c.config_file, dir / "config_source.txt");
  std::string cmdline;
  for (int i = 0; i < argc; ++i) cmdline += (i ? " " : "") + std::string(argv[i]);
  write_file(dir / "command.txt", command + "\n" + cmdline + "\n");
  std::cout << "run directory: " << dir.string() << "\n";
}

void open_dataset(const Run& run, Dataset& ds) {
  if (run.data_root.empty()) throw Failure("no dataset root: pass --data-root, set data_root, or export GRASP_DATA_ROOT");
  check(gg_dataset_open(run.cfg.get(), run.data_root.c_str(), ds.out()));
  const int skipped = gg_dataset_skipped_annotations(ds.get());
  std::cout << "dataset: " << gg_dataset_size(ds.get()) << " samples";
  if (skipped > 0) std::cout << " (" << skipped << " annotations skipped)";
  std::cout << "\n";
}

size_t resolve_sample(const gg_dataset* ds, const std::string& which) {
  const size_t n = gg_dataset_size(ds);
  for (size_t i = 0; i < n; ++i)
    if (sample_id(ds, i) == which) return i;
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(which, &pos);
    if (pos == which.size() && v < n) return static_cast<size_t>(v);
  } catch (const std::exception&) {
  }
  throw Failure("no sample '" + which + "' (give a sample id or an index below " + std::to_string(n) + ")");
}

int cmd_encode(const Common& c, const std::string& only, int argc, char** argv) {
  Run run;
  start_run(run, c, "encode", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  const fs::path maps_dir = run.dir / "maps";
  fs::create_directories(maps_dir);
  std::vector<size_t> indices;
  if (only.empty()) {
    for (size_t i = 0; i < gg_dataset_size(ds.get()); ++i) indices.push_back(i);
  } else {
    indices.push_back(resolve_sample(ds.get(), only));
  }
  std::ostringstream manifest;
  manifest << "sample_id\tfile\n";
  for (size_t i : indices) {
    Pyramid p;
    check(gg_dataset_encode(run.cfg.get(), ds.get(), i, p.out()));
    const std::string id = sample_id(ds.get(), i);
    const std::string file = id + ".ggmaps";
    check(gg_pyramid_save(p.get(), run.cfg.get(), (maps_dir / file).c_str()));
    manifest << id << '\t' << "maps/" << file << '\n';
  }
  write_file(run.dir / "maps.tsv", manifest.str());
  std::cout << "encoded " << indices.size() << " samples\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& init, int argc, char** argv) {
  Run run;
  start_run(run, c, "train", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  Network net;
  if (init.empty()) {
    check(gg_network_create(run.cfg.get(), net.out()));
  } else {
    check(gg_network_load(init.c_str(), net.out()));
  }
  std::cout << "parameters: " << gg_network_parameter_count(net.get()) << "\n";
  gg_train_summary s{};
  check(gg_train(run.cfg.get(), ds.get(), net.get(), run.dir.c_str(), &s));
  std::cout << "steps " << s.steps << ", epochs " << s.epochs << ", loss " << s.initial_loss << " -> " << s.final_loss
            << ", lr " << s.final_lr;
  if (s.best_val_accuracy >= 0.0) std::cout << ", best val accuracy " << s.best_val_accuracy;
  std::cout << "\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::string& predictions, int argc,
                 char** argv) {
  if (checkpoint.empty() == predictions.empty()) throw Failure("evaluate needs exactly one of --checkpoint or --predictions");
  Run run;
  start_run(run, c, "evaluate", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  Predictions preds;
  if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint)) throw Failure("missing checkpoint: " + checkpoint);
    Network net;
    check(gg_network_load(checkpoint.c_str(), net.out()));
    check(gg_predict(run.cfg.get(), net.get(), ds.get(), preds.out()));
    check(gg_predictions_save(preds.get(), (run.dir / "predictions.json").c_str()));
  } else {
    check(gg_predictions_load(predictions.c_str(), preds.out()));
    fs::copy_file(predictions, run.dir / "predictions.json");
  }
  EvalResult r;
  check(gg_evaluate(run.cfg.get(), preds.get(), ds.get(), r.out()));
  check(gg_eval_write(r.get(), run.dir.c_str()));
  int matched = 0, samples = 0;
  check(gg_eval_counts(r.get(), &matched, &samples));
  std::printf("accuracy %.4f (%d/%d), mean inference %.2f ms\n", gg_eval_accuracy(r.get()), matched, samples,
              gg_predictions_mean_ms(preds.get()));
  return 0;
}

int cmd_sweep(const Common& c, const std::string& predictions, int argc, char** argv) {
  Run run;
  start_run(run, c, "sweep", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  Predictions preds;
  check(gg_predictions_load(predictions.c_str(), preds.out()));
  SweepResult s;
  check(gg_sweep(run.cfg.get(), preds.get(), ds.get(), s.out()));
  check(gg_sweep_write(s.get(), run.dir.c_str()));
  std::ifstream grid(run.dir / "sweep_grid.csv");
  std::cout << grid.rdbuf();
  return 0;
}

int cmd_ablate(const Common& c, int argc, char** argv) {
  Run run;
  start_run(run, c, "ablate", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  Ablation a;
  check(gg_ablate(run.cfg.get(), ds.get(), run.dir.c_str(), a.out()));
  check(gg_ablation_write(a.get(), run.dir.c_str()));
  for (size_t i = 0; i < gg_ablation_count(a.get()); ++i) {
    int ggt = 0, glff = 0;
    double acc = 0.0;
    check(gg_ablation_row(a.get(), i, &ggt, &glff, &acc));
    std::printf("GGT %-3s GLFF %-3s accuracy %.4f\n", ggt ? "on" : "off", glff ? "on" : "off", acc);
  }
  return 0;
}

int cmd_visualize(const Common& c, const std::string& sample, const std::string& checkpoint, int argc, char** argv) {
  Run run;
  start_run(run, c, "visualize", argc, argv);
  Dataset ds;
  open_dataset(run, ds);
  const size_t index = resolve_sample(ds.get(), sample);
  Network net;
  if (!checkpoint.empty()) check(gg_network_load(checkpoint.c_str(), net.out()));
  const fs::path dir = run.dir / sample_id(ds.get(), index);
  check(gg_visualize(run.cfg.get(), ds.get(), index, net.get(), dir.c_str()));
  std::cout << "wrote " << (dir / "panel.png").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-guided grasp detection: label encoding, training and evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string sample, checkpoint, predictions, init;

  auto* encode = app.add_subcommand("encode", "encode every sample's rectangles into label maps");
  add_common(encode, common);
  encode->add_option("--sample", sample, "encode only this sample (id or index)");

  auto* train = app.add_subcommand("train", "train the network on the configured split");
  add_common(train, common);
  train->add_option("--init", init, "start from this checkpoint")->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint or a prediction cache");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint, "network checkpoint");
  evaluate->add_option("--predictions", predictions, "cached predictions.json")->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "re-score cached predictions over the threshold grid");
  add_common(sweep, common);
  sweep->add_option("--predictions", predictions, "cached predictions.json")->required()->check(CLI::ExistingFile);

  auto* ablate = app.add_subcommand("ablate", "train and score the GGT/GLFF on/off variants");
  add_common(ablate, common);

  auto* visualize = app.add_subcommand("visualize", "render quality, width and angle heatmaps with the top-1 overlay");
  add_common(visualize, common);
  visualize->add_option("--sample", sample, "sample id or index")->required();
  visualize->add_option("--checkpoint", checkpoint, "show network predictions instead of encoded labels")
      ->check(CLI::ExistingFile);

  std::string fixture_root, fixture_kind = "cornell";
  int fixture_count = 8;
  std::uint64_t fixture_seed = 1;
  auto* fixture = app.add_subcommand("fixture", "write a small synthetic dataset for trying the pipeline");
  fixture->add_option("root", fixture_root, "output directory")->required();
  fixture->add_option("--kind", fixture_kind, "cornell or jacquard")->capture_default_str();
  fixture->add_option("--count", fixture_count, "number of images")->capture_default_str();
  fixture->add_option("--seed", fixture_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*encode) return cmd_encode(common, sample, argc, argv);
    if (*train) return cmd_train(common, init, argc, argv);
    if (*evaluate) return cmd_evaluate(common, checkpoint, predictions, argc, argv);
    if (*sweep) return cmd_sweep(common, predictions, argc, argv);
    if (*ablate) return cmd_ablate(common, argc, argv);
    if (*visualize) return cmd_visualize(common, sample, checkpoint, argc, argv);
    if (*fixture) {
      check(gg_write_fixture(fixture_root.c_str(), fixture_kind.c_str(), fixture_count, fixture_seed));
      std::cout << "wrote " << fixture_count << " " << fixture_kind << " samples to " << fixture_root << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "ggrasp: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

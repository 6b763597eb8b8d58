#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "evaluation.hpp"
#include "label_codec.hpp"
#include "network.hpp"
#include "pipeline.hpp"
#include "training.hpp"

namespace ggrasp {

/// Flat "key = value" run configuration with a closed key set. Later sources
/// override earlier ones: defaults, then the config file, then command-line sets.
class RunConfig {
 public:
  RunConfig();

  /// Every key with its default value, in canonical order.
  static const std::vector<std::pair<std::string, std::string>>& schema();

  /// Parses file text; unknown keys are reported together in one error.
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);
  /// One "key=value" assignment.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  bool is_set_explicitly(const std::string& key) const;

  /// Sorted "key = value" lines of every key, the exact text echoed into run directories.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  DatasetKind dataset() const;
  std::filesystem::path data_root() const;
  std::uint64_t seed() const;
  InputConfig input() const;
  SplitSpec split() const;
  EncoderConfig encoder() const;
  DecoderConfig decoder() const;
  NetworkConfig network() const;
  TrainConfig train() const;
  MetricConfig metric() const;
  std::vector<double> sweep_jaccard() const;
  std::vector<double> sweep_angles() const;  // radians
  TrainOptions train_options(const std::filesystem::path& out_dir) const;

  /// Parses every typed view once so bad values fail before any work starts.
  void validate() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;

  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
};

}  // namespace ggrasp

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autograd.hpp"
#include "label_codec.hpp"
#include "random.hpp"

namespace ggrasp {

struct NetworkConfig {
  int input_channels = 4;
  int base_channels = 32;
  int num_residual_blocks = 5;
  int num_bins = 18;
  /// Global-local feature fusion before every upsampling stage; off = identity.
  bool glff = true;
  bool deformable = true;
  std::uint64_t seed = 0;

  // Test hooks.
  /// Uniform(-s, s) init for the offset predictor instead of zeros.
  double offset_init_scale = 0.0;
  /// Replace the GFAB channel weights by ones.
  bool force_unit_alpha = false;
  /// LFEB layers see only their immediate predecessor when false.
  bool dense_connections = true;

  void validate() const;
  int head_channels() const { return num_bins + 2; }
  /// Canonical "key=value" lines of every shape-relevant field.
  std::string canonical() const;
  std::uint64_t hash() const;
};

struct NetworkOutput {
  /// [N, K + 2, S/4, S/4], [N, K + 2, S/2, S/2], [N, K + 2, S, S]; channel 0 is
  /// quality, 1..K the angle classes, K + 1 the width.
  std::array<nn::Var, 3> heads;
};

/// Copies sample `n` of a head tensor into a GraspMaps at the given scale.
GraspMaps head_to_maps(const nn::Tensor& head, int n, double scale);

/// Packs per-sample pyramids into head-shaped target tensors.
std::array<nn::Tensor, 3> maps_to_targets(const std::vector<std::vector<GraspMaps>>& pyramids);

class Conv {
 public:
  Conv() = default;
  /// Uniform init with bound sqrt(6 / fan_in); transposed weights are [cin, cout, k, k].
  Conv(int cin, int cout, int k, int stride, int pad, Rng& rng, bool transposed = false);
  nn::Var operator()(const nn::Var& x) const;
  nn::Var weight, bias;
  int stride = 1, pad = 0;
  bool transposed = false;
};

class GraspNetwork {
 public:
  explicit GraspNetwork(const NetworkConfig& cfg);

  NetworkOutput forward(const nn::Var& input) const;

  const NetworkConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, nn::Var>>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad();

  // Exposed blocks, for unit tests of the individual stages.
  nn::Var gfab(std::size_t stage, const nn::Var& x) const;
  nn::Var lfeb(std::size_t stage, const nn::Var& x) const;
  int decoder_channels(std::size_t stage) const { return dec_in_[stage]; }

 private:
  struct Gfab {
    Conv squeeze_conv, fc1, fc2, local, out;
  };
  struct Lfeb {
    std::array<Conv, 3> layers;
    Conv fuse;
  };
  struct Residual {
    Conv a, b;
  };

  void register_conv(const std::string& name, Conv& c);

  NetworkConfig cfg_;
  std::vector<std::pair<std::string, nn::Var>> params_;
  Conv stem_, down1_, down2_, down3_, down4_, offset_;
  std::vector<Residual> res_;
  std::array<Gfab, 4> gfab_;
  std::array<Lfeb, 4> lfeb_;
  std::array<Conv, 4> up_, lateral_;
  std::array<Conv, 3> heads_;
  std::array<int, 4> dec_in_{};
};

}  // namespace ggrasp

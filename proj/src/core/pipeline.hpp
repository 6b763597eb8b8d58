#pragma once

#include <vector>

#include "dataset.hpp"
#include "label_codec.hpp"
#include "network.hpp"

namespace ggrasp {

struct InputConfig {
  int size = 320;
  /// 0 selects the largest centered square of the image.
  int crop = 0;

  void validate() const;
};

/// Network input plus the label pyramid in the network frame.
struct PreparedSample {
  NetworkInput input;
  std::vector<GraspRectangle> rects;  // network frame
  std::vector<GraspMaps> targets;     // scales 1/4, 1/2, 1
};

PreparedSample prepare_sample(const GraspSample& sample, const InputConfig& input, const EncoderConfig& enc);

/// Stacks network inputs into one [N, 4, S, S] tensor.
nn::Tensor stack_inputs(const std::vector<const NetworkInput*>& inputs);

/// Top-1 pose from the full-scale head of sample n, in the network frame.
std::vector<GraspPose> decode_head(const nn::Tensor& full_scale_head, int n, int count, const EncoderConfig& enc,
                                   const DecoderConfig& dec);

}  // namespace ggrasp

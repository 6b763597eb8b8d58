#include "pipeline.hpp"

#include "error.hpp"

namespace ggrasp {

void InputConfig::validate() const {
  if (size <= 0 || size % 16 != 0) fail(ErrorCode::kInvalidArgument, "input size must be a positive multiple of 16");
  if (crop < 0) fail(ErrorCode::kInvalidArgument, "input crop must be >= 0");
}

PreparedSample prepare_sample(const GraspSample& sample, const InputConfig& input, const EncoderConfig& enc) {
  PreparedSample out;
  out.input = to_network_input(sample, input.size, input.crop);
  out.rects = out.input.transform.rects_to_network(sample.rects);
  out.targets = encode_pyramid(out.rects, input.size, input.size, enc);
  return out;
}

nn::Tensor stack_inputs(const std::vector<const NetworkInput*>& inputs) {
  if (inputs.empty()) fail(ErrorCode::kInvalidArgument, "empty batch");
  const int s = inputs[0]->size;
  nn::Tensor t(nn::Shape{static_cast<int>(inputs.size()), 4, s, s});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->size != s) fail(ErrorCode::kShape, "batch inputs differ in size");
    std::copy(inputs[i]->data.begin(), inputs[i]->data.end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

std::vector<GraspPose> decode_head(const nn::Tensor& head, int n, int count, const EncoderConfig& enc,
                                   const DecoderConfig& dec) {
  return decode(head_to_maps(head, n, 1.0), count, enc, dec);
}

}  // namespace ggrasp

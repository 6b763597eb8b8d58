#include "network.hpp"

#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace ggrasp {

using nn::Shape;
using nn::Tensor;
using nn::Var;

void NetworkConfig::validate() const {
  if (input_channels != 4) fail(ErrorCode::kInvalidArgument, "network: input must have 4 channels (RGB-D)");
  if (base_channels < 4) fail(ErrorCode::kInvalidArgument, "network: base_channels must be at least 4");
  if (num_residual_blocks != 5) fail(ErrorCode::kInvalidArgument, "network: the encoder uses five residual blocks");
  if (num_bins < 2) fail(ErrorCode::kInvalidArgument, "network: K must be at least 2");
  if (!(offset_init_scale >= 0.0)) fail(ErrorCode::kInvalidArgument, "network: offset_init_scale must be >= 0");
}

std::string NetworkConfig::canonical() const {
  std::ostringstream s;
  s << "network.input_channels=" << input_channels << '\n'
    << "network.base_channels=" << base_channels << '\n'
    << "network.num_residual_blocks=" << num_residual_blocks << '\n'
    << "network.K=" << num_bins << '\n'
    << "network.glff=" << (glff ? "on" : "off") << '\n'
    << "network.deformable=" << (deformable ? "on" : "off") << '\n';
  return s.str();
}

std::uint64_t NetworkConfig::hash() const { return io::fnv1a64(canonical()); }

Conv::Conv(int cin, int cout, int k, int s, int p, Rng& rng, bool t) : stride(s), pad(p), transposed(t) {
  const double fan_in = t ? static_cast<double>(cin) * k * k / (s * s) : static_cast<double>(cin) * k * k;
  const double wb = std::sqrt(6.0 / fan_in);
  const double bb = 1.0 / std::sqrt(fan_in);
  Tensor w(t ? Shape{cin, cout, k, k} : Shape{cout, cin, k, k});
  for (double& v : w.data) v = uniform(rng, -wb, wb);
  Tensor b(Shape{cout, 1, 1, 1});
  for (double& v : b.data) v = uniform(rng, -bb, bb);
  weight = Var(std::move(w), true);
  bias = Var(std::move(b), true);
}

Var Conv::operator()(const Var& x) const {
  return transposed ? nn::conv_transpose2d(x, weight, bias, stride, pad) : nn::conv2d(x, weight, bias, stride, pad);
}

void GraspNetwork::register_conv(const std::string& name, Conv& c) {
  params_.emplace_back(name + ".weight", c.weight);
  params_.emplace_back(name + ".bias", c.bias);
}

namespace {
constexpr double kHeadPriorLogit = -4.0;  // sigmoid(-4) ~ 0.018
}  // namespace

GraspNetwork::GraspNetwork(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg.seed);
  const int c = cfg.base_channels;

  stem_ = Conv(cfg.input_channels, c, 3, 1, 1, rng);
  down1_ = Conv(c, c, 3, 2, 1, rng);
  down2_ = Conv(c, 2 * c, 3, 2, 1, rng);
  down3_ = Conv(2 * c, 4 * c, 3, 2, 1, rng);
  down4_ = Conv(4 * c, 4 * c, 3, 2, 1, rng);
  register_conv("encoder.stem", stem_);
  register_conv("encoder.down1", down1_);
  register_conv("encoder.down2", down2_);
  register_conv("encoder.down3", down3_);
  register_conv("encoder.down4", down4_);
  if (cfg.deformable) {
    // Offset predictor for the deformable stage; zero init starts it as a plain conv.
    offset_ = Conv(4 * c, 18, 3, 2, 1, rng);
    for (double& v : offset_.weight.value().data) v = uniform(rng, -1.0, 1.0) * cfg.offset_init_scale;
    for (double& v : offset_.bias.value().data) v = uniform(rng, -1.0, 1.0) * cfg.offset_init_scale;
    register_conv("encoder.offset", offset_);
  }

  res_.resize(cfg.num_residual_blocks);
  for (int i = 0; i < cfg.num_residual_blocks; ++i) {
    res_[i].a = Conv(4 * c, 4 * c, 3, 1, 1, rng);
    res_[i].b = Conv(4 * c, 4 * c, 3, 1, 1, rng);
    // Residual branches start quiet so the stacked blocks begin close to identity
    // instead of compounding activation variance. Not exactly zero: a silent
    // branch leaves every dead bottleneck unit sitting on the ReLU kink.
    for (double& v : res_[i].b.weight.value().data) v *= 0.1;
    for (double& v : res_[i].b.bias.value().data) v *= 0.1;
    register_conv("residual" + std::to_string(i) + ".a", res_[i].a);
    register_conv("residual" + std::to_string(i) + ".b", res_[i].b);
  }

  dec_in_ = {4 * c, 2 * c, c, c / 2};
  const std::array<int, 4> dec_out{2 * c, c, c / 2, c / 2};
  // Encoder features at each stage's output resolution: down3, down2, down1, stem.
  const std::array<int, 4> enc_ch{4 * c, 2 * c, c, c};
  for (std::size_t s = 0; s < 4; ++s) {
    const int ch = dec_in_[s];
    const std::string prefix = "decoder" + std::to_string(s);
    if (cfg.glff) {
      const int mid = std::max(1, ch / 4);
      Gfab& g = gfab_[s];
      g.squeeze_conv = Conv(ch, ch, 3, 1, 1, rng);
      g.fc1 = Conv(ch, mid, 1, 1, 0, rng);
      g.fc2 = Conv(mid, ch, 1, 1, 0, rng);
      g.local = Conv(ch, ch, 1, 1, 0, rng);
      g.out = Conv(ch, ch, 1, 1, 0, rng);
      register_conv(prefix + ".gfab.squeeze_conv", g.squeeze_conv);
      register_conv(prefix + ".gfab.fc1", g.fc1);
      register_conv(prefix + ".gfab.fc2", g.fc2);
      register_conv(prefix + ".gfab.local", g.local);
      register_conv(prefix + ".gfab.out", g.out);

      const int growth = std::max(1, ch / 2);
      Lfeb& l = lfeb_[s];
      for (int i = 0; i < 3; ++i) {
        l.layers[i] = Conv(ch + i * growth, growth, 3, 1, 1, rng);
        register_conv(prefix + ".lfeb.layer" + std::to_string(i), l.layers[i]);
      }
      l.fuse = Conv(ch + 3 * growth, ch, 1, 1, 0, rng);
      register_conv(prefix + ".lfeb.fuse", l.fuse);
    }
    up_[s] = Conv(ch, dec_out[s], 4, 2, 1, rng, true);
    register_conv(prefix + ".up", up_[s]);
    lateral_[s] = Conv(enc_ch[s], dec_out[s], 1, 1, 0, rng);
    register_conv(prefix + ".lateral", lateral_[s]);
  }
  for (std::size_t h = 0; h < 3; ++h) {
    heads_[h] = Conv(dec_out[h + 1], cfg.head_channels(), 3, 1, 1, rng);
    // Quiet heads with a background prior: the quality and width targets are
    // zero almost everywhere, so starting near zero skips a long phase of
    // learning the mean before anything gets localized.
    for (double& v : heads_[h].weight.value().data) v *= 0.1;
    auto& bias = heads_[h].bias.value().data;
    bias[0] = kHeadPriorLogit;
    bias[cfg.num_bins + 1] = kHeadPriorLogit;
    register_conv("head" + std::to_string(h), heads_[h]);
  }
}

std::size_t GraspNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : params_) n += v.value().size();
  return n;
}

void GraspNetwork::zero_grad() {
  for (auto& [name, v] : params_) {
    Tensor& g = v.grad();
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
}

Var GraspNetwork::gfab(std::size_t stage, const Var& x) const {
  if (!cfg_.glff) fail(ErrorCode::kInvalidArgument, "network built without feature fusion");
  const Gfab& g = gfab_.at(stage);
  Var alpha;
  if (cfg_.force_unit_alpha) {
    alpha = Var(Tensor(Shape{x.shape().n, x.shape().c, 1, 1}, 1.0));
  } else {
    Var pooled = nn::global_avg_pool(nn::relu(g.squeeze_conv(x)));
    alpha = nn::sigmoid(g.fc2(nn::relu(g.fc1(pooled))));
  }
  Var local = nn::relu(g.local(x));
  return nn::relu(g.out(nn::channel_scale(local, alpha)));
}

Var GraspNetwork::lfeb(std::size_t stage, const Var& x) const {
  if (!cfg_.glff) fail(ErrorCode::kInvalidArgument, "network built without feature fusion");
  const Lfeb& l = lfeb_.at(stage);
  std::vector<Var> features{x};
  for (int i = 0; i < 3; ++i) {
    std::vector<Var> in = features;
    if (!cfg_.dense_connections) {
      // Same weights, but every input except the immediate predecessor is zeroed.
      for (std::size_t j = 0; j + 1 < in.size(); ++j) in[j] = Var(Tensor(in[j].shape(), 0.0));
    }
    features.push_back(nn::relu(l.layers[i](nn::concat_channels(in))));
  }
  if (!cfg_.dense_connections)
    for (std::size_t j = 0; j + 1 < features.size(); ++j) features[j] = Var(Tensor(features[j].shape(), 0.0));
  return nn::relu(l.fuse(nn::concat_channels(features)));
}

NetworkOutput GraspNetwork::forward(const Var& input) const {
  const Shape s = input.shape();
  if (s.c != cfg_.input_channels) fail(ErrorCode::kShape, "forward: expected 4 input channels, got " + s.str());
  if (s.h != s.w || s.h % 16 != 0 || s.h <= 0)
    fail(ErrorCode::kShape, "forward: input must be square with side divisible by 16, got " + s.str());

  std::array<Var, 4> skip;
  Var x = nn::relu(stem_(input));
  skip[3] = x;
  x = nn::relu(down1_(x));
  skip[2] = x;
  x = nn::relu(down2_(x));
  skip[1] = x;
  x = nn::relu(down3_(x));
  skip[0] = x;
  if (cfg_.deformable) {
    Var off = offset_(x);
    x = nn::relu(nn::deform_conv2d(x, off, down4_.weight, down4_.bias, down4_.stride, down4_.pad));
  } else {
    x = nn::relu(down4_(x));
  }
  for (const auto& r : res_) x = nn::relu(nn::add(x, r.b(nn::relu(r.a(x)))));

  NetworkOutput out;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    if (cfg_.glff) x = lfeb(stage, gfab(stage, x));
    x = nn::relu(nn::add(up_[stage](x), lateral_[stage](skip[stage])));
    if (stage >= 1) {
      out.heads[stage - 1] = nn::sigmoid_channels(heads_[stage - 1](x), {0, cfg_.num_bins + 1});
    }
  }
  return out;
}

GraspMaps head_to_maps(const Tensor& head, int n, double scale) {
  const Shape s = head.shape;
  GraspMaps m(s.c - 2, s.h, s.w, scale);
  const double* src = head.sample(n);
  const std::size_t plane = s.plane();
  std::copy_n(src, plane, m.quality.begin());
  std::copy_n(src + plane, (s.c - 2) * plane, m.angle.begin());
  std::copy_n(src + (s.c - 1) * plane, plane, m.width_map.begin());
  return m;
}

std::array<Tensor, 3> maps_to_targets(const std::vector<std::vector<GraspMaps>>& pyramids) {
  if (pyramids.empty()) fail(ErrorCode::kInvalidArgument, "no targets");
  std::array<Tensor, 3> out;
  const int batch = static_cast<int>(pyramids.size());
  for (std::size_t l = 0; l < 3; ++l) {
    const GraspMaps& first = pyramids[0].at(l);
    const int ch = first.num_bins + 2;
    out[l] = Tensor(Shape{batch, ch, first.height, first.width});
    const std::size_t plane = first.pixels();
    for (int n = 0; n < batch; ++n) {
      const GraspMaps& m = pyramids[n].at(l);
      if (m.height != first.height || m.width != first.width || m.num_bins != first.num_bins)
        fail(ErrorCode::kShape, "targets in a batch differ in shape");
      double* dst = out[l].sample(n);
      std::copy(m.quality.begin(), m.quality.end(), dst);
      std::copy(m.angle.begin(), m.angle.end(), dst + plane);
      std::copy(m.width_map.begin(), m.width_map.end(), dst + (ch - 1) * plane);
    }
  }
  return out;
}

}  // namespace ggrasp

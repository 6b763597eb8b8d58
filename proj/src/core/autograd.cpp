#include "autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "error.hpp"

namespace ggrasp::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

thread_local bool g_grad_enabled = true;

int out_extent(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// cols is [C * k * k, Ho * Wo].
void im2col(const double* src, int c, int h, int w, int k, int stride, int pad, int ho, int wo, double* cols) {
  for (int ch = 0; ch < c; ++ch) {
    const double* plane = src + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* in_row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[ox] = (ix >= 0 && ix < w) ? in_row[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adds cols back into dst, the adjoint of im2col.
void col2im(const double* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo, double* dst) {
  for (int ch = 0; ch < c; ++ch) {
    double* plane = dst + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* out_row = plane + static_cast<std::size_t>(iy) * w;
          const double* in = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) out_row[ix] += in[ox];
          }
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kShape, what);
}

bool any_requires_grad(const std::vector<Var>& inputs) {
  for (const auto& v : inputs)
    if (v.defined() && v.requires_grad()) return true;
  return false;
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream s;
  s << '[' << n << ',' << c << ',' << h << ',' << w << ']';
  return s.str();
}

Tensor& Node::ensure_grad() {
  if (grad.shape != value.shape || grad.data.size() != value.data.size()) grad = Tensor(value.shape, 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  require(value().size() == 1, "item() on a non-scalar " + shape().str());
  return value().data[0];
}

namespace {
thread_local KinkTrace* g_trace = nullptr;
}  // namespace

KinkTrace::KinkTrace() : previous_(g_trace) { g_trace = this; }
KinkTrace::~KinkTrace() { g_trace = previous_; }
bool KinkTrace::active() { return g_trace != nullptr; }
void KinkTrace::record(std::uint64_t branch) {
  if (!g_trace) return;
  // splitmix-style mixing keeps the signature order sensitive.
  std::uint64_t z = g_trace->hash_ + 0x9E3779B97F4A7C15ULL + branch;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  g_trace->hash_ = z ^ (z >> 31);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  const bool track = g_grad_enabled && any_requires_grad(inputs);
  Var out(std::move(value), track);
  if (track) {
    auto& node = *out.node();
    node.inputs.reserve(inputs.size());
    for (const auto& v : inputs) node.inputs.push_back(v.node());
    node.backward = std::move(backward_fn);
  }
  return out;
}

void backward(const Var& loss) {
  require(loss.value().size() == 1, "backward() needs a scalar loss");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad().data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->ensure_grad();
      n->backward(*n);
    }
  }
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int k = ws.h;
  require(ws.h == ws.w && ws.c == xs.c, "conv2d: weight " + ws.str() + " does not fit input " + xs.str());
  require(!bias.defined() || bias.shape().size() == static_cast<std::size_t>(ws.n), "conv2d: bias size");
  const int ho = out_extent(xs.h, k, stride, pad);
  const int wo = out_extent(xs.w, k, stride, pad);
  require(ho > 0 && wo > 0, "conv2d: empty output for input " + xs.str());
  const int kdim = xs.c * k * k;
  const int p = ho * wo;
  const bool direct = k == 1 && stride == 1 && pad == 0;

  Tensor out(Shape{xs.n, ws.n, ho, wo});
  std::vector<double> cols(direct ? 0 : static_cast<std::size_t>(kdim) * p);
  CMapR wmat(weight.value().data.data(), ws.n, kdim);
  for (int n = 0; n < xs.n; ++n) {
    const double* src = x.value().sample(n);
    if (!direct) im2col(src, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, cols.data());
    CMapR cmat(direct ? src : cols.data(), kdim, p);
    MapR omat(out.sample(n), ws.n, p);
    omat.noalias() = wmat * cmat;
    if (bias.defined()) omat.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value().data.data(), ws.n);
  }

  return make_result(std::move(out), {x, weight, bias}, [=](Node& self) {
    Node* xn = self.inputs[0].get();
    Node* wn = self.inputs[1].get();
    Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
    CMapR wm(wn->value.data.data(), ws.n, kdim);
    std::vector<double> col(direct ? 0 : static_cast<std::size_t>(kdim) * p);
    std::vector<double> dcol(static_cast<std::size_t>(kdim) * p);
    for (int n = 0; n < xs.n; ++n) {
      CMapR dout(self.grad.sample(n), ws.n, p);
      if (wn->requires_grad) {
        const double* src = xn->value.sample(n);
        if (!direct) im2col(src, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, col.data());
        CMapR cm(direct ? src : col.data(), kdim, p);
        MapR(wn->ensure_grad().data.data(), ws.n, kdim).noalias() += dout * cm.transpose();
      }
      if (bn && bn->requires_grad) {
        Eigen::Map<Eigen::VectorXd>(bn->ensure_grad().data.data(), ws.n) += dout.rowwise().sum();
      }
      if (xn->requires_grad) {
        double* dx = xn->ensure_grad().sample(n);
        if (direct) {
          MapR(dx, kdim, p).noalias() += wm.transpose() * dout;
        } else {
          MapR(dcol.data(), kdim, p).noalias() = wm.transpose() * dout;
          col2im(dcol.data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo, dx);
        }
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();  // [Cin, Cout, k, k]
  const int k = ws.h;
  require(ws.h == ws.w && ws.n == xs.c, "conv_transpose2d: weight " + ws.str() + " does not fit input " + xs.str());
  const int cout = ws.c;
  require(!bias.defined() || bias.shape().size() == static_cast<std::size_t>(cout), "conv_transpose2d: bias size");
  const int ho = (xs.h - 1) * stride - 2 * pad + k;
  const int wo = (xs.w - 1) * stride - 2 * pad + k;
  require(ho > 0 && wo > 0, "conv_transpose2d: empty output");
  const int kdim = cout * k * k;
  const int p = xs.h * xs.w;

  Tensor out(Shape{xs.n, cout, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(kdim) * p);
  CMapR wmat(weight.value().data.data(), xs.c, kdim);
  for (int n = 0; n < xs.n; ++n) {
    CMapR xin(x.value().sample(n), xs.c, p);
    MapR(cols.data(), kdim, p).noalias() = wmat.transpose() * xin;
    double* dst = out.sample(n);
    col2im(cols.data(), cout, ho, wo, k, stride, pad, xs.h, xs.w, dst);
    if (bias.defined()) {
      for (int c = 0; c < cout; ++c) {
        double* plane = dst + static_cast<std::size_t>(c) * ho * wo;
        const double b = bias.value().data[c];
        for (int i = 0; i < ho * wo; ++i) plane[i] += b;
      }
    }
  }

  return make_result(std::move(out), {x, weight, bias}, [=](Node& self) {
    Node* xn = self.inputs[0].get();
    Node* wn = self.inputs[1].get();
    Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
    CMapR wm(wn->value.data.data(), xs.c, kdim);
    std::vector<double> dcol(static_cast<std::size_t>(kdim) * p);
    for (int n = 0; n < xs.n; ++n) {
      const double* dout = self.grad.sample(n);
      im2col(dout, cout, ho, wo, k, stride, pad, xs.h, xs.w, dcol.data());
      CMapR dc(dcol.data(), kdim, p);
      if (xn->requires_grad) MapR(xn->ensure_grad().sample(n), xs.c, p).noalias() += wm * dc;
      if (wn->requires_grad) {
        CMapR xin(xn->value.sample(n), xs.c, p);
        MapR(wn->ensure_grad().data.data(), xs.c, kdim).noalias() += xin * dc.transpose();
      }
      if (bn && bn->requires_grad) {
        auto& bg = bn->ensure_grad().data;
        for (int c = 0; c < cout; ++c) {
          const double* plane = dout + static_cast<std::size_t>(c) * ho * wo;
          double s = 0.0;
          for (int i = 0; i < ho * wo; ++i) s += plane[i];
          bg[c] += s;
        }
      }
    }
  });
}

double bilinear_sample(const double* plane, int h, int w, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const double ly = y - fy, lx = x - fx;
  auto v = [&](int yy, int xx) {
    return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? plane[static_cast<std::size_t>(yy) * w + xx] : 0.0;
  };
  return (1 - ly) * (1 - lx) * v(y0, x0) + (1 - ly) * lx * v(y0, x0 + 1) + ly * (1 - lx) * v(y0 + 1, x0) +
         ly * lx * v(y0 + 1, x0 + 1);
}

namespace {

void deform_im2col(const double* src, const double* off, int c, int h, int w, int k, int stride, int pad, int ho,
                   int wo, double* cols) {
  const int taps = k * k;
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int t = 0; t < taps; ++t) {
    const int ky = t / k, kx = t % k;
    const double* offx = off + (2 * t) * p;
    const double* offy = off + (2 * t + 1) * p;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const std::size_t pos = static_cast<std::size_t>(oy) * wo + ox;
        const double sy = oy * stride - pad + ky + offy[pos];
        const double sx = ox * stride - pad + kx + offx[pos];
        if (KinkTrace::active()) {
          KinkTrace::record(static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(sy))));
          KinkTrace::record(static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(sx))));
        }
        for (int ch = 0; ch < c; ++ch)
          cols[(static_cast<std::size_t>(ch) * taps + t) * p + pos] =
              bilinear_sample(src + static_cast<std::size_t>(ch) * h * w, h, w, sy, sx);
      }
    }
  }
}

}  // namespace

Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape os = offsets.shape();
  const int k = ws.h;
  require(ws.h == ws.w && ws.c == xs.c, "deform_conv2d: weight " + ws.str() + " does not fit input " + xs.str());
  const int ho = out_extent(xs.h, k, stride, pad);
  const int wo = out_extent(xs.w, k, stride, pad);
  if (os.c != 2 * k * k)
    fail(ErrorCode::kShape, "deform_conv2d: offset channel count " + std::to_string(os.c) + " != 2N = " +
                                std::to_string(2 * k * k));
  require(os.n == xs.n && os.h == ho && os.w == wo, "deform_conv2d: offsets " + os.str() + " do not match output");
  const int taps = k * k;
  const int kdim = xs.c * taps;
  const int p = ho * wo;

  Tensor out(Shape{xs.n, ws.n, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(kdim) * p);
  CMapR wmat(weight.value().data.data(), ws.n, kdim);
  for (int n = 0; n < xs.n; ++n) {
    deform_im2col(x.value().sample(n), offsets.value().sample(n), xs.c, xs.h, xs.w, k, stride, pad, ho, wo,
                  cols.data());
    MapR omat(out.sample(n), ws.n, p);
    omat.noalias() = wmat * CMapR(cols.data(), kdim, p);
    if (bias.defined()) omat.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value().data.data(), ws.n);
  }

  return make_result(std::move(out), {x, offsets, weight, bias}, [=](Node& self) {
    Node* xn = self.inputs[0].get();
    Node* on = self.inputs[1].get();
    Node* wn = self.inputs[2].get();
    Node* bn = self.inputs[3] ? self.inputs[3].get() : nullptr;
    CMapR wm(wn->value.data.data(), ws.n, kdim);
    std::vector<double> col(static_cast<std::size_t>(kdim) * p);
    std::vector<double> dcol(static_cast<std::size_t>(kdim) * p);
    for (int n = 0; n < xs.n; ++n) {
      CMapR dout(self.grad.sample(n), ws.n, p);
      const double* src = xn->value.sample(n);
      const double* off = on->value.sample(n);
      if (wn->requires_grad) {
        deform_im2col(src, off, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, col.data());
        MapR(wn->ensure_grad().data.data(), ws.n, kdim).noalias() += dout * CMapR(col.data(), kdim, p).transpose();
      }
      if (bn && bn->requires_grad)
        Eigen::Map<Eigen::VectorXd>(bn->ensure_grad().data.data(), ws.n) += dout.rowwise().sum();
      if (!xn->requires_grad && !on->requires_grad) continue;
      MapR(dcol.data(), kdim, p).noalias() = wm.transpose() * dout;
      double* dx = xn->requires_grad ? xn->ensure_grad().sample(n) : nullptr;
      double* doff = on->requires_grad ? on->ensure_grad().sample(n) : nullptr;
      for (int t = 0; t < taps; ++t) {
        const int ky = t / k, kx = t % k;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const std::size_t pos = static_cast<std::size_t>(oy) * wo + ox;
            const double sy = oy * stride - pad + ky + off[(2 * t + 1) * static_cast<std::size_t>(p) + pos];
            const double sx = ox * stride - pad + kx + off[(2 * t) * static_cast<std::size_t>(p) + pos];
            const double fy = std::floor(sy), fx = std::floor(sx);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const double ly = sy - fy, lx = sx - fx;
            const int ys[2] = {y0, y0 + 1};
            const int xs2[2] = {x0, x0 + 1};
            const double wy[2] = {1 - ly, ly};
            const double wx[2] = {1 - lx, lx};
            double gx = 0.0, gy = 0.0;
            for (int ch = 0; ch < xs.c; ++ch) {
              const double g = dcol[(static_cast<std::size_t>(ch) * taps + t) * p + pos];
              if (g == 0.0) continue;
              const double* plane = src + static_cast<std::size_t>(ch) * xs.h * xs.w;
              double v[2][2];
              for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                  const bool in = ys[a] >= 0 && ys[a] < xs.h && xs2[b] >= 0 && xs2[b] < xs.w;
                  const std::size_t idx = static_cast<std::size_t>(ys[a]) * xs.w + xs2[b];
                  v[a][b] = in ? plane[idx] : 0.0;
                  if (dx && in) dx[static_cast<std::size_t>(ch) * xs.h * xs.w + idx] += g * wy[a] * wx[b];
                }
              }
              gx += g * ((1 - ly) * (v[0][1] - v[0][0]) + ly * (v[1][1] - v[1][0]));
              gy += g * ((1 - lx) * (v[1][0] - v[0][0]) + lx * (v[1][1] - v[0][1]));
            }
            if (doff) {
              doff[(2 * t) * static_cast<std::size_t>(p) + pos] += gx;
              doff[(2 * t + 1) * static_cast<std::size_t>(p) + pos] += gy;
            }
          }
        }
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  if (KinkTrace::active())
    for (double v : out.data) KinkTrace::record(v > 0.0);
  return make_result(std::move(out), {x}, [](Node& self) {
    Node* xn = self.inputs[0].get();
    auto& dx = xn->ensure_grad().data;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xn->value.data[i] > 0.0) dx[i] += self.grad.data[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return make_result(std::move(out), {x}, [](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad().data;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double s = self.value.data[i];
      dx[i] += self.grad.data[i] * s * (1.0 - s);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), "add: shapes " + a.shape().str() + " and " + b.shape().str());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& d = in->ensure_grad().data;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad.data[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data) v *= factor;
  return make_result(std::move(out), {x}, [factor](Node& self) {
    auto& d = self.inputs[0]->ensure_grad().data;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * self.grad.data[i];
  });
}

Var concat_channels(std::span<const Var> parts) {
  require(!parts.empty(), "concat: no inputs");
  Shape s = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape ps = p.shape();
    require(ps.n == s.n && ps.h == s.h && ps.w == s.w, "concat: spatial/batch mismatch");
    total += ps.c;
  }
  Tensor out(Shape{s.n, total, s.h, s.w});
  const std::size_t plane = s.plane();
  std::vector<int> chans;
  for (int n = 0; n < s.n; ++n) {
    double* dst = out.sample(n);
    for (const auto& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p.shape().c) * plane;
      std::copy_n(p.value().sample(n), len, dst);
      dst += len;
    }
  }
  for (const auto& p : parts) chans.push_back(p.shape().c);
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [chans, plane](Node& self) {
    const int batch = self.value.shape.n;
    for (int n = 0; n < batch; ++n) {
      const double* src = self.grad.sample(n);
      for (std::size_t i = 0; i < self.inputs.size(); ++i) {
        const std::size_t len = static_cast<std::size_t>(chans[i]) * plane;
        Node* in = self.inputs[i].get();
        if (in->requires_grad) {
          double* d = in->ensure_grad().sample(n);
          for (std::size_t j = 0; j < len; ++j) d[j] += src[j];
        }
        src += len;
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  Tensor out(Shape{s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = x.value().sample(n) + c * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out.data[static_cast<std::size_t>(n) * s.c + c] = acc / static_cast<double>(plane);
    }
  }
  return make_result(std::move(out), {x}, [s, plane](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double g = self.grad.data[static_cast<std::size_t>(n) * s.c + c] / static_cast<double>(plane);
        double* p = dx.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += g;
      }
    }
  });
}

Var channel_scale(const Var& x, const Var& sc) {
  const Shape s = x.shape();
  require(sc.shape() == Shape{s.n, s.c, 1, 1}, "channel_scale: scale " + sc.shape().str() + " vs " + s.str());
  const std::size_t plane = s.plane();
  Tensor out = x.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const double f = sc.value().data[static_cast<std::size_t>(n) * s.c + c];
      double* p = out.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] *= f;
    }
  return make_result(std::move(out), {x, sc}, [s, plane](Node& self) {
    Node* xn = self.inputs[0].get();
    Node* sn = self.inputs[1].get();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t sidx = static_cast<std::size_t>(n) * s.c + c;
        const double* g = self.grad.sample(n) + c * plane;
        if (xn->requires_grad) {
          const double f = sn->value.data[sidx];
          double* d = xn->ensure_grad().sample(n) + c * plane;
          for (std::size_t i = 0; i < plane; ++i) d[i] += f * g[i];
        }
        if (sn->requires_grad) {
          const double* xv = xn->value.sample(n) + c * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += g[i] * xv[i];
          sn->ensure_grad().data[sidx] += acc;
        }
      }
    }
  });
}

Var sigmoid_channels(const Var& x, std::vector<int> channels) {
  const Shape s = x.shape();
  std::vector<char> mask(s.c, 0);
  for (int c : channels) {
    require(c >= 0 && c < s.c, "sigmoid_channels: channel out of range");
    mask[c] = 1;
  }
  const std::size_t plane = s.plane();
  Tensor out = x.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      if (!mask[c]) continue;
      double* p = out.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = 1.0 / (1.0 + std::exp(-p[i]));
    }
  return make_result(std::move(out), {x}, [s, plane, mask](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const double* g = self.grad.sample(n) + c * plane;
        const double* y = self.value.sample(n) + c * plane;
        double* d = dx.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] += mask[c] ? g[i] * y[i] * (1.0 - y[i]) : g[i];
      }
  });
}

}  // namespace ggrasp::nn

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ggrasp::nn {

/// NCHW; vectors are represented as [N, C, 1, 1] and scalars as [1, 1, 1, 1].
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}

  std::size_t size() const { return data.size(); }
  double* sample(int n) { return data.data() + static_cast<std::size_t>(n) * shape.c * shape.plane(); }
  const double* sample(int n) const { return data.data() + static_cast<std::size_t>(n) * shape.c * shape.plane(); }
  double& at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  double at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
};

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads this node's grad and accumulates into the inputs that require grad.
  std::function<void(Node&)> backward;

  Tensor& ensure_grad();
};

/// Handle to a value in the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->ensure_grad(); }
  const Shape& shape() const { return node_->value.shape; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  const std::shared_ptr<Node>& node() const { return node_; }
  double item() const;

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Records which side of every non-smooth point (ReLU zero, bilinear cell
/// edge, smooth-L1 branch) a forward pass landed on. Two passes with equal
/// signatures ran through the same linear piece, which is what a finite
/// difference check needs to know. Inactive traces cost one branch per op.
class KinkTrace {
 public:
  KinkTrace();
  ~KinkTrace();
  KinkTrace(const KinkTrace&) = delete;
  KinkTrace& operator=(const KinkTrace&) = delete;

  std::uint64_t signature() const { return hash_; }
  /// Folds one branch decision into the active trace, if any.
  static void record(std::uint64_t branch);
  static bool active();

 private:
  std::uint64_t hash_ = 0;
  KinkTrace* previous_;
};

/// Builds a result node; `backward` is dropped when no input requires grad.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Reverse-mode sweep from a scalar.
void backward(const Var& loss);

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// weight is [C_in, C_out, k, k]; output side (in - 1) * stride - 2 * pad + k.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// Offsets are [N, 2 * k * k, H_out, W_out]; channel 2n holds the x offset and
/// 2n + 1 the y offset of kernel tap n (row-major over the k x k grid).
/// Samples are bilinear, reading zero outside the input.
Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias, int stride, int pad);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var concat_channels(std::span<const Var> parts);
Var global_avg_pool(const Var& x);
/// x [N, C, H, W] times s [N, C, 1, 1] broadcast over space.
Var channel_scale(const Var& x, const Var& s);
/// Sigmoid on the listed channels, identity elsewhere.
Var sigmoid_channels(const Var& x, std::vector<int> channels);

double bilinear_sample(const double* plane, int h, int w, double y, double x);

}  // namespace ggrasp::nn

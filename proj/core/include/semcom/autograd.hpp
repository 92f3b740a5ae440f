#pragma once

#include "semcom/tensor.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

// Minimal reverse-mode automatic differentiation over NHWC tensors.
//
// Every op returns a new Node holding its value. When grad mode is enabled and
// some input requires a gradient, the node also keeps its parents and a
// closure that propagates its gradient to them. backward() walks the graph in
// reverse topological order.
namespace semcom::ag {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  Mat value;
  Mat grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  void add_grad(const Mat& g);
  Mat& grad_buffer();  // zero-initialised on first use
  bool has_grad() const { return grad.size() != 0; }
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad);

// Builds an op output; parents/closure are only retained when a gradient is needed.
Var make_result(Shape shape, Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates into every reachable node.
void backward(const Var& root);

Tensor to_tensor(const Var& v);
double scalar(const Var& v);

// y = x W + b, with W stored as {1,1,in,out} and b as {1,1,1,out}; b may be null.
Var linear(const Var& x, const Var& weight, const Var& bias);
// Per-token normalisation over channels followed by an affine map.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gelu(const Var& x);
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// sum_i coeffs[i] * terms[i]; all terms share one shape.
Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs);

// out.row(r) = x.row(index[r]), or zeros where index[r] < 0.
Var gather_rows(const Var& x, std::shared_ptr<const std::vector<int>> index, Shape out_shape);
// Folds each f x f spatial block into channels: (n,h,w,c) -> (n,h/f,w/f,c*f*f).
Var space_to_depth(const Var& x, int factor);
// Bilinear resampling with half-pixel centres (align_corners = false).
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var concat_channels(std::span<const Var> xs);
// Transposed convolution with a 2x2 kernel and stride 2: (n,h,w,cin) -> (n,2h,2w,cout).
// weight is {1,1,cin,4*cout} with the kernel tap (dy*2+dx) as the outer block.
Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias);

}  // namespace semcom::ag

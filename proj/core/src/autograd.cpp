#include "semcom/autograd.hpp"

#include "semcom/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace semcom {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "[" << s.n << "x" << s.h << "x" << s.w << "x" << s.c << "]";
  return os.str();
}

}  // namespace semcom

namespace semcom::ag {

namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<Var>& parents) {
  for (const auto& p : parents) {
    if (p && p->requires_grad) return true;
  }
  return false;
}

struct AxisTaps {
  std::vector<int> i0;
  std::vector<int> i1;
  std::vector<double> frac;
};

AxisTaps bilinear_taps(int in, int out) {
  AxisTaps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    t.i0[o] = lo;
    t.i1[o] = hi;
    t.frac[o] = src - lo;
  }
  return t;
}

}  // namespace

void Node::add_grad(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Mat& Node::grad_buffer() {
  if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
  return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor t) { return leaf(std::move(t), false); }

Var leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = t.shape;
  n->value = std::move(t.data);
  n->requires_grad = requires_grad;
  return n;
}

Var make_result(Shape shape, Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  if (g_grad_enabled && any_requires_grad(parents)) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

void backward(const Var& root) {
  if (root->value.size() != 1) throw UsageError("backward() needs a scalar root");
  if (!root->requires_grad) return;

  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->add_grad(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

Tensor to_tensor(const Var& v) { return Tensor(v->shape, v->value); }

double scalar(const Var& v) {
  if (v->value.size() != 1) throw UsageError("scalar() on a non-scalar value " + to_string(v->shape));
  return v->value(0, 0);
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x->shape.c != weight->shape.w) {
    throw ContractError("linear: input channels " + std::to_string(x->shape.c) + " vs weight rows " +
                        std::to_string(weight->shape.w));
  }
  Shape out = x->shape;
  out.c = weight->shape.c;
  Mat y(x->value.rows(), out.c);
  y.noalias() = x->value * weight->value;
  if (bias) y.rowwise() += bias->value.row(0);

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_result(out, std::move(y), std::move(parents), [](Node& self) {
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    if (xv->requires_grad) xv->grad_buffer().noalias() += self.grad * wv->value.transpose();
    if (wv->requires_grad) wv->grad_buffer().noalias() += xv->value.transpose() * self.grad;
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      self.parents[2]->grad_buffer().row(0) += self.grad.colwise().sum();
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index rows = x->value.rows();
  const Eigen::Index c = x->value.cols();
  auto xhat = std::make_shared<Mat>(rows, c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(rows);
  Mat y(rows, c);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto xr = x->value.row(r);
    const double mean = xr.mean();
    const double var = (xr.array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    xhat->row(r) = (xr.array() - mean) * is;
    y.row(r) = xhat->row(r).cwiseProduct(gamma->value.row(0)) + beta->value.row(0);
  }
  return make_result(x->shape, std::move(y), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    const Var& xv = self.parents[0];
    const Var& g = self.parents[1];
    const Var& b = self.parents[2];
    if (g->requires_grad) g->grad_buffer().row(0) += self.grad.cwiseProduct(*xhat).colwise().sum();
    if (b->requires_grad) b->grad_buffer().row(0) += self.grad.colwise().sum();
    if (xv->requires_grad) {
      Mat& gx = xv->grad_buffer();
      const double inv_c = 1.0 / static_cast<double>(self.value.cols());
      for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
        const Eigen::RowVectorXd gh = self.grad.row(r).cwiseProduct(g->value.row(0));
        const double m1 = gh.sum() * inv_c;
        const double m2 = gh.dot(xhat->row(r)) * inv_c;
        gx.row(r) += (*inv_std)(r) * (gh.array() - m1 - xhat->row(r).array() * m2).matrix();
      }
    }
  });
}

Var gelu(const Var& x) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Mat y = x->value.unaryExpr([inv_sqrt2](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  return make_result(x->shape, std::move(y), {x}, [inv_sqrt2](Node& self) {
    const Var& xv = self.parents[0];
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Mat d = xv->value.unaryExpr([&](double v) {
      return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    xv->grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Var add(const Var& a, const Var& b) {
  if (a->shape != b->shape) throw ContractError("add: shape " + to_string(a->shape) + " vs " + to_string(b->shape));
  return make_result(a->shape, a->value + b->value, {a, b}, [](Node& self) {
    for (const auto& p : self.parents) {
      if (p->requires_grad) p->add_grad(self.grad);
    }
  });
}

Var scale(const Var& a, double s) {
  return make_result(a->shape, a->value * s, {a}, [s](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->add_grad(self.grad * s);
  });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) throw UsageError("weighted_sum: mismatched terms");
  Mat v = terms[0]->value * coeffs[0];
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (terms[i]->shape != terms[0]->shape) throw ContractError("weighted_sum: shape mismatch");
    v += terms[i]->value * coeffs[i];
  }
  std::vector<Var> parents(terms.begin(), terms.end());
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return make_result(terms[0]->shape, std::move(v), std::move(parents), [c](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (self.parents[i]->requires_grad && c[i] != 0.0) self.parents[i]->add_grad(self.grad * c[i]);
    }
  });
}

Var gather_rows(const Var& x, std::shared_ptr<const std::vector<int>> index, Shape out_shape) {
  if (static_cast<int>(index->size()) != out_shape.rows() || out_shape.c != x->shape.c) {
    throw ContractError("gather_rows: index/shape mismatch");
  }
  Mat y(out_shape.rows(), out_shape.c);
  const auto& idx = *index;
  for (int r = 0; r < out_shape.rows(); ++r) {
    if (idx[r] >= 0) {
      y.row(r) = x->value.row(idx[r]);
    } else {
      y.row(r).setZero();
    }
  }
  return make_result(out_shape, std::move(y), {x}, [index](Node& self) {
    Mat& gx = self.parents[0]->grad_buffer();
    const auto& ix = *index;
    for (int r = 0; r < static_cast<int>(ix.size()); ++r) {
      if (ix[r] >= 0) gx.row(ix[r]) += self.grad.row(r);
    }
  });
}

Var space_to_depth(const Var& x, int f) {
  const Shape in = x->shape;
  if (in.h % f != 0 || in.w % f != 0) throw ContractError("space_to_depth: " + to_string(in) + " not divisible");
  const Shape out{in.n, in.h / f, in.w / f, in.c * f * f};
  Mat y(out.rows(), out.c);
  auto src_row = [in](int b, int y0, int x0) { return (b * in.h + y0) * in.w + x0; };
  for (int b = 0; b < out.n; ++b) {
    for (int i = 0; i < out.h; ++i) {
      for (int j = 0; j < out.w; ++j) {
        const int r = (b * out.h + i) * out.w + j;
        for (int di = 0; di < f; ++di) {
          for (int dj = 0; dj < f; ++dj) {
            y.row(r).segment((di * f + dj) * in.c, in.c) = x->value.row(src_row(b, i * f + di, j * f + dj));
          }
        }
      }
    }
  }
  return make_result(out, std::move(y), {x}, [in, out, f, src_row](Node& self) {
    Mat& gx = self.parents[0]->grad_buffer();
    for (int b = 0; b < out.n; ++b) {
      for (int i = 0; i < out.h; ++i) {
        for (int j = 0; j < out.w; ++j) {
          const int r = (b * out.h + i) * out.w + j;
          for (int di = 0; di < f; ++di) {
            for (int dj = 0; dj < f; ++dj) {
              gx.row(src_row(b, i * f + di, j * f + dj)) += self.grad.row(r).segment((di * f + dj) * in.c, in.c);
            }
          }
        }
      }
    }
  });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Shape in = x->shape;
  if (in.h == out_h && in.w == out_w) return x;
  const Shape out{in.n, out_h, out_w, in.c};
  auto ty = std::make_shared<AxisTaps>(bilinear_taps(in.h, out_h));
  auto tx = std::make_shared<AxisTaps>(bilinear_taps(in.w, out_w));
  Mat y(out.rows(), out.c);
  for (int b = 0; b < in.n; ++b) {
    const int base = b * in.h * in.w;
    for (int oy = 0; oy < out_h; ++oy) {
      const double fy = ty->frac[oy];
      const int r0 = base + ty->i0[oy] * in.w;
      const int r1 = base + ty->i1[oy] * in.w;
      for (int ox = 0; ox < out_w; ++ox) {
        const double fx = tx->frac[ox];
        const int x0 = tx->i0[ox];
        const int x1 = tx->i1[ox];
        y.row((b * out_h + oy) * out_w + ox) =
            (1 - fy) * ((1 - fx) * x->value.row(r0 + x0) + fx * x->value.row(r0 + x1)) +
            fy * ((1 - fx) * x->value.row(r1 + x0) + fx * x->value.row(r1 + x1));
      }
    }
  }
  return make_result(out, std::move(y), {x}, [in, out, ty, tx](Node& self) {
    Mat& gx = self.parents[0]->grad_buffer();
    for (int b = 0; b < in.n; ++b) {
      const int base = b * in.h * in.w;
      for (int oy = 0; oy < out.h; ++oy) {
        const double fy = ty->frac[oy];
        const int r0 = base + ty->i0[oy] * in.w;
        const int r1 = base + ty->i1[oy] * in.w;
        for (int ox = 0; ox < out.w; ++ox) {
          const double fx = tx->frac[ox];
          const auto g = self.grad.row((b * out.h + oy) * out.w + ox);
          gx.row(r0 + tx->i0[ox]) += (1 - fy) * (1 - fx) * g;
          gx.row(r0 + tx->i1[ox]) += (1 - fy) * fx * g;
          gx.row(r1 + tx->i0[ox]) += fy * (1 - fx) * g;
          gx.row(r1 + tx->i1[ox]) += fy * fx * g;
        }
      }
    }
  });
}

Var concat_channels(std::span<const Var> xs) {
  if (xs.empty()) throw UsageError("concat_channels: no inputs");
  Shape out = xs[0]->shape;
  out.c = 0;
  for (const auto& v : xs) {
    if (v->shape.n != out.n || v->shape.h != out.h || v->shape.w != out.w) {
      throw ContractError("concat_channels: spatial mismatch " + to_string(v->shape));
    }
    out.c += v->shape.c;
  }
  Mat y(out.rows(), out.c);
  int col = 0;
  for (const auto& v : xs) {
    y.middleCols(col, v->shape.c) = v->value;
    col += v->shape.c;
  }
  std::vector<Var> parents(xs.begin(), xs.end());
  return make_result(out, std::move(y), std::move(parents), [](Node& self) {
    int c0 = 0;
    for (const auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(c0, p->shape.c);
      c0 += p->shape.c;
    }
  });
}

Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias) {
  const Shape in = x->shape;
  const int cout = weight->shape.c / 4;
  if (weight->shape.w != in.c || weight->shape.c != 4 * cout) throw ContractError("conv_transpose2x2: weight shape");
  const Shape out{in.n, in.h * 2, in.w * 2, cout};
  Mat taps(in.rows(), 4 * cout);
  taps.noalias() = x->value * weight->value;
  Mat y(out.rows(), cout);
  for (int b = 0; b < in.n; ++b) {
    for (int i = 0; i < in.h; ++i) {
      for (int j = 0; j < in.w; ++j) {
        const int r = (b * in.h + i) * in.w + j;
        for (int d = 0; d < 4; ++d) {
          const int orow = (b * out.h + 2 * i + d / 2) * out.w + 2 * j + d % 2;
          y.row(orow) = taps.row(r).segment(d * cout, cout);
          if (bias) y.row(orow) += bias->value.row(0);
        }
      }
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_result(out, std::move(y), std::move(parents), [in, out, cout](Node& self) {
    Mat gtaps(in.rows(), 4 * cout);
    for (int b = 0; b < in.n; ++b) {
      for (int i = 0; i < in.h; ++i) {
        for (int j = 0; j < in.w; ++j) {
          const int r = (b * in.h + i) * in.w + j;
          for (int d = 0; d < 4; ++d) {
            const int orow = (b * out.h + 2 * i + d / 2) * out.w + 2 * j + d % 2;
            gtaps.row(r).segment(d * cout, cout) = self.grad.row(orow);
          }
        }
      }
    }
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    if (xv->requires_grad) xv->grad_buffer().noalias() += gtaps * wv->value.transpose();
    if (wv->requires_grad) wv->grad_buffer().noalias() += xv->value.transpose() * gtaps;
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      self.parents[2]->grad_buffer().row(0) += self.grad.colwise().sum();
    }
  });
}

}  // namespace semcom::ag

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>

namespace semcom {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// NHWC shape. A tensor is stored as a (n*h*w) x c row-major matrix, one row per
// spatial position, so per-token linear layers are plain matrix products.
// Parameter matrices use {1, 1, rows, cols}.
struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  int rows() const { return n * h * w; }
  std::size_t numel() const { return static_cast<std::size_t>(rows()) * static_cast<std::size_t>(c); }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

struct Tensor {
  Shape shape;
  Mat data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(Mat::Zero(s.rows(), s.c)) {}
  Tensor(Shape s, Mat m) : shape(s), data(std::move(m)) {}

  int row(int b, int y, int x) const { return (b * shape.h + y) * shape.w + x; }
  double& at(int b, int y, int x, int ch) { return data(row(b, y, x), ch); }
  double at(int b, int y, int x, int ch) const { return data(row(b, y, x), ch); }
};

}  // namespace semcom

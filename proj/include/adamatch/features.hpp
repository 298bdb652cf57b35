#pragma once

#include "adamatch/geometry.hpp"
#include "adamatch/tensor.hpp"

namespace adamatch {

// Dense h x w x c feature map whose cell (col, row) covers
// [stride*col, stride*(col+1)) x [stride*row, stride*(row+1)) in pixels.
struct FeatureGrid {
  Tensor map;
  int stride = 8;

  FeatureGrid() = default;
  FeatureGrid(Tensor m, int s) : map(std::move(m)), stride(s) {}

  int rows() const { return static_cast<int>(map.dim(0)); }
  int cols() const { return static_cast<int>(map.dim(1)); }
  int channels() const { return static_cast<int>(map.dim(2)); }
  int cell_count() const { return rows() * cols(); }

  Vec2 cell_center(int index) const {
    return {stride * (index % cols()) + 0.5 * stride,
            stride * (index / cols()) + 0.5 * stride};
  }
  // Pixel coordinate -> continuous grid coordinate (cell centers are integers).
  Vec2 to_grid(const Vec2& pixel) const {
    return (pixel - Vec2::Constant(0.5 * stride)) / stride;
  }
  Vec2 to_pixel(const Vec2& grid) const {
    return grid * stride + Vec2::Constant(0.5 * stride);
  }
  // Cell containing a pixel (floor bucketing); -1 when outside the grid.
  int cell_of(const Vec2& pixel) const;

  // (h*w) x c view in row-major cell order.
  Tensor tokens() const { return map.reshaped({map.dim(0) * map.dim(1), map.dim(2)}); }

  bool operator==(const FeatureGrid& other) const = default;
};

inline int FeatureGrid::cell_of(const Vec2& pixel) const {
  if (!(pixel.x() >= 0.0 && pixel.y() >= 0.0)) return -1;
  const int col = static_cast<int>(pixel.x() / stride);
  const int row = static_cast<int>(pixel.y() / stride);
  if (col >= cols() || row >= rows()) return -1;
  return row * cols() + col;
}

}  // namespace adamatch

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace adamatch {

// Dense row-major float32 array. Feature maps are stored H x W x C, matrices
// as rows x cols.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, float fill = 0.0f);
  Tensor(std::vector<int64_t> shape, std::vector<float> data);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](int64_t flat) { return data_[flat]; }
  float operator[](int64_t flat) const { return data_[flat]; }

  float& at(int64_t i, int64_t j) { return data_[i * shape_[1] + j]; }
  float at(int64_t i, int64_t j) const { return data_[i * shape_[1] + j]; }
  float& at(int64_t i, int64_t j, int64_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float at(int64_t i, int64_t j, int64_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Same data, new shape; element count must agree.
  Tensor reshaped(std::vector<int64_t> shape) const;

  bool operator==(const Tensor& other) const = default;

  std::string shape_string() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<float> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);

// Softmax along `axis` with max subtraction.
Tensor softmax(const Tensor& t, int axis);

// a (m x k) * b (k x n), accumulated in double.
Tensor matmul(const Tensor& a, const Tensor& b);
// a (m x k) * b^T where b is (n x k).
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// "Same" 2-D convolution with zero padding.
// input: H x W x Cin, kernel: k x k x Cin x Cout, bias: Cout (or empty).
Tensor conv2d(const Tensor& input, const Tensor& kernel,
              const Tensor& bias = Tensor());

struct SampleResult {
  Tensor values;              // N x C; rows of out-of-range points are zero
  std::vector<bool> in_range; // per point
  bool all_in_range() const;
};

// Bilinear lookup at continuous grid coordinates (x = column, y = row).
// Points must lie in [0, W-1] x [0, H-1]; others are flagged.
SampleResult bilinear_sample(const Tensor& map,
                             std::span<const Eigen::Vector2d> points);

// Row-wise layer normalization of an N x C matrix.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
// elu(x) + 1, the positive feature map of linear attention.
Tensor elu_plus_one(const Tensor& a);
// Adds a length-C vector to every row of an N x C matrix.
Tensor add_row_vector(const Tensor& a, const Tensor& row);

double sum(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace adamatch

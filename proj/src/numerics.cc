#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "adamatch/tensor.hpp"

namespace adamatch {

namespace {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrixF> as_matrix(const Tensor& t) {
  return {t.raw(), t.dim(0), t.dim(1)};
}

Tensor from_matrix(const RowMatrixD& m) {
  Tensor out({m.rows(), m.cols()});
  Eigen::Map<RowMatrixF>(out.raw(), m.rows(), m.cols()) = m.cast<float>();
  return out;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected rank-2 tensor, got " +
                                t.shape_string());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
}

template <typename Fn>
Tensor map_elements(const Tensor& a, Fn fn) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

}  // namespace

int64_t shape_product(const std::vector<int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<int64_t> shape, float fill)
    : shape_(std::move(shape)) {
  for (int64_t d : shape_) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
  }
  data_.assign(static_cast<size_t>(shape_product(shape_)), fill);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != static_cast<int64_t>(data_.size())) {
    throw std::invalid_argument("Tensor: shape " + shape_string() +
                                " does not match data length " +
                                std::to_string(data_.size()));
  }
}

int64_t Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw std::invalid_argument("Tensor::dim: axis out of range");
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  return Tensor(std::move(shape), data_);
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

Tensor softmax(const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.rank()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + t.shape_string());
  }
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= t.dim(a);
  for (int a = axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
  const int64_t len = t.dim(axis);

  Tensor out(t.shape());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      float peak = -std::numeric_limits<float>::infinity();
      for (int64_t k = 0; k < len; ++k) peak = std::max(peak, t[base + k * inner]);
      double total = 0.0;
      for (int64_t k = 0; k < len; ++k) {
        total += std::exp(static_cast<double>(t[base + k * inner]) - peak);
      }
      for (int64_t k = 0; k < len; ++k) {
        out[base + k * inner] = static_cast<float>(
            std::exp(static_cast<double>(t[base + k * inner]) - peak) / total);
      }
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner dimensions differ " +
                                a.shape_string() + " x " + b.shape_string());
  }
  RowMatrixD prod = as_matrix(a).cast<double>() * as_matrix(b).cast<double>();
  return from_matrix(prod);
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_transposed");
  require_matrix(b, "matmul_transposed");
  if (a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("matmul_transposed: inner dimensions differ " +
                                a.shape_string() + " x " + b.shape_string() +
                                "^T");
  }
  RowMatrixD prod =
      as_matrix(a).cast<double>() * as_matrix(b).cast<double>().transpose();
  return from_matrix(prod);
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.dim(1), a.dim(0)});
  for (int64_t i = 0; i < a.dim(0); ++i)
    for (int64_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: expected HxWxCin input and kxkxCinxCout kernel");
  }
  const int64_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int64_t k = kernel.dim(0);
  if (kernel.dim(1) != k || k % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel must be square with odd size");
  }
  if (kernel.dim(2) != cin) {
    throw std::invalid_argument("conv2d: channel mismatch, input has " +
                                std::to_string(cin) + ", kernel expects " +
                                std::to_string(kernel.dim(2)));
  }
  const int64_t cout = kernel.dim(3);
  if (!bias.empty() && bias.size() != cout) {
    throw std::invalid_argument("conv2d: bias length must equal Cout");
  }
  const int64_t r = k / 2;

  // im2col: (h*w) x (k*k*cin), zero padded, then one GEMM.
  RowMatrixD cols = RowMatrixD::Zero(h * w, k * k * cin);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const int64_t row = y * w + x;
      for (int64_t dy = 0; dy < k; ++dy) {
        const int64_t sy = y + dy - r;
        if (sy < 0 || sy >= h) continue;
        for (int64_t dx = 0; dx < k; ++dx) {
          const int64_t sx = x + dx - r;
          if (sx < 0 || sx >= w) continue;
          const float* src = input.raw() + (sy * w + sx) * cin;
          const int64_t col = (dy * k + dx) * cin;
          for (int64_t c = 0; c < cin; ++c) cols(row, col + c) = src[c];
        }
      }
    }
  }
  Eigen::Map<const RowMatrixF> kmat(kernel.raw(), k * k * cin, cout);
  RowMatrixD out = cols * kmat.cast<double>();
  if (!bias.empty()) {
    for (int64_t o = 0; o < cout; ++o) out.col(o).array() += bias[o];
  }
  Tensor result({h, w, cout});
  Eigen::Map<RowMatrixF>(result.raw(), h * w, cout) = out.cast<float>();
  return result;
}

bool SampleResult::all_in_range() const {
  return std::all_of(in_range.begin(), in_range.end(), [](bool b) { return b; });
}

SampleResult bilinear_sample(const Tensor& map,
                             std::span<const Eigen::Vector2d> points) {
  if (map.rank() != 3) {
    throw std::invalid_argument("bilinear_sample: expected HxWxC map");
  }
  const int64_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  SampleResult result{Tensor({static_cast<int64_t>(points.size()), c}),
                      std::vector<bool>(points.size(), false)};
  constexpr double kSlack = 1e-9;
  for (size_t n = 0; n < points.size(); ++n) {
    double x = points[n].x(), y = points[n].y();
    if (!(x >= -kSlack && y >= -kSlack && x <= (w - 1) + kSlack &&
          y <= (h - 1) + kSlack)) {
      continue;
    }
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(std::floor(x)), w - 1);
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(std::floor(y)), h - 1);
    const int64_t x1 = std::min<int64_t>(x0 + 1, w - 1);
    const int64_t y1 = std::min<int64_t>(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
    const double w10 = (1 - fx) * fy, w11 = fx * fy;
    float* dst = result.values.raw() + n * c;
    for (int64_t ch = 0; ch < c; ++ch) {
      dst[ch] = static_cast<float>(w00 * map.at(y0, x0, ch) + w01 * map.at(y0, x1, ch) +
                                   w10 * map.at(y1, x0, ch) + w11 * map.at(y1, x1, ch));
    }
    result.in_range[n] = true;
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  require_matrix(x, "layer_norm");
  const int64_t n = x.dim(0), c = x.dim(1);
  if (gamma.size() != c || beta.size() != c) {
    throw std::invalid_argument("layer_norm: gamma/beta length must equal C");
  }
  Tensor out(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float* row = x.raw() + i * c;
    double mean = 0.0;
    for (int64_t j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < c; ++j) {
      out.at(i, j) = static_cast<float>((row[j] - mean) * inv * gamma[j] + beta[j]);
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor scale(const Tensor& a, float factor) {
  return map_elements(a, [factor](float v) { return v * factor; });
}

Tensor sigmoid(const Tensor& a) {
  return map_elements(a, [](float v) {
    return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  });
}

Tensor relu(const Tensor& a) {
  return map_elements(a, [](float v) { return v > 0.0f ? v : 0.0f; });
}

Tensor elu_plus_one(const Tensor& a) {
  return map_elements(a, [](float v) {
    return v > 0.0f ? v + 1.0f : static_cast<float>(std::exp(static_cast<double>(v)));
  });
}

Tensor add_row_vector(const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row_vector");
  if (row.size() != a.dim(1)) {
    throw std::invalid_argument("add_row_vector: length mismatch");
  }
  Tensor out = a;
  for (int64_t i = 0; i < a.dim(0); ++i)
    for (int64_t j = 0; j < a.dim(1); ++j) out.at(i, j) += row[j];
  return out;
}

double sum(const Tensor& t) {
  double total = 0.0;
  for (float v : t.data()) total += v;
  return total;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](float v) { return std::isfinite(v); });
}

}  // namespace adamatch

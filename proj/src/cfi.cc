#include "adamatch/cfi.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "adamatch/rng.hpp"

namespace adamatch {

const char* const kCfiLayers[6] = {"cfi.self1",  "cfi.cross1", "cfi.decode",
                                   "cfi.guided", "cfi.self2",  "cfi.cross2"};

namespace {

constexpr const char* kRefineLayers[2] = {"refine.self", "refine.cross"};

// Gaussian matrix orthogonalized by QR; rectangular shapes keep orthonormal
// rows or columns.
Tensor orthogonal(Rng& rng, int rows, int cols, double gain) {
  const int n = std::max(rows, cols);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes the decomposition unique.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.at(i, j) = static_cast<float>(gain * q(i, j));
  return out;
}

Tensor gaussian(Rng& rng, std::vector<int64_t> shape, double stddev) {
  Tensor out(std::move(shape));
  for (float& v : out.data()) v = static_cast<float>(rng.normal() * stddev);
  return out;
}

void add_layer(ModelWeights& w, const std::string& prefix, int d, Rng* rng) {
  auto proj = [&](int rows, int cols, double gain) {
    return rng ? orthogonal(*rng, rows, cols, gain) : Tensor({rows, cols});
  };
  const double residual_gain = 1.0 / std::sqrt(static_cast<double>(d));
  for (const char* norm : {".norm_x", ".norm_src", ".norm_ffn"}) {
    w.params[prefix + norm + ".gamma"] = Tensor({d}, 1.0f);
    w.params[prefix + norm + ".beta"] = Tensor({d});
  }
  w.params[prefix + ".wq"] = proj(d, d, 1.0);
  w.params[prefix + ".wk"] = proj(d, d, 1.0);
  w.params[prefix + ".wv"] = proj(d, d, 1.0);
  w.params[prefix + ".wo"] = proj(d, d, residual_gain);
  w.params[prefix + ".ffn1"] = proj(d, 2 * d, 1.0);
  w.params[prefix + ".ffn2"] = proj(2 * d, d, residual_gain);
}

ModelWeights build(const ModelDims& dims, Rng* rng) {
  if (dims.d_model <= 0 || dims.fine_dim <= 0 || dims.heads <= 0 ||
      dims.d_model % dims.heads != 0 || dims.fine_dim % dims.heads != 0 ||
      dims.d_model % 2 != 0) {
    throw std::invalid_argument("ModelDims: channel widths must be even and divisible by heads");
  }
  ModelWeights w;
  w.dims = dims;
  const int d = dims.d_model;
  for (const char* layer : kCfiLayers) add_layer(w, layer, d, rng);
  w.params["cfi.query"] = rng ? gaussian(*rng, {1, d}, 1.0) : Tensor({1, d});

  const int mid = d / 2;
  w.params["covis.conv1.weight"] =
      rng ? gaussian(*rng, {3, 3, d, mid}, 1.0 / std::sqrt(9.0 * d)) : Tensor({3, 3, d, mid});
  w.params["covis.conv1.bias"] = Tensor({mid});
  w.params["covis.conv2.weight"] =
      rng ? gaussian(*rng, {3, 3, mid, 1}, 1.0 / std::sqrt(9.0 * mid)) : Tensor({3, 3, mid, 1});
  w.params["covis.conv2.bias"] = Tensor({1});

  for (const char* layer : kRefineLayers) add_layer(w, layer, dims.fine_dim, rng);
  return w;
}

Tensor slice_cols(const Tensor& t, int64_t begin, int64_t count) {
  Tensor out({t.dim(0), count});
  for (int64_t i = 0; i < t.dim(0); ++i)
    for (int64_t j = 0; j < count; ++j) out.at(i, j) = t.at(i, begin + j);
  return out;
}

}  // namespace

std::string attention_kind_name(AttentionKind kind) {
  return kind == AttentionKind::kSoftmax ? "softmax" : "linear";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "softmax") return AttentionKind::kSoftmax;
  if (name == "linear") return AttentionKind::kLinear;
  throw std::invalid_argument("unknown attention kind: " + name);
}

const Tensor& ModelWeights::get(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end()) throw std::invalid_argument("missing weight: " + name);
  return it->second;
}

bool ModelWeights::operator==(const ModelWeights& other) const {
  return dims.d_model == other.dims.d_model && dims.fine_dim == other.dims.fine_dim &&
         dims.heads == other.dims.heads && dims.attention == other.dims.attention &&
         params == other.params;
}

ModelWeights init_weights(uint64_t seed, const ModelDims& dims) {
  Rng rng(seed);
  return build(dims, &rng);
}

ModelWeights zero_weights(const ModelDims& dims) { return build(dims, nullptr); }

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, AttentionKind kind) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw std::invalid_argument("attention: q, k, v must be matrices");
  }
  if (q.dim(1) != k.dim(1)) throw std::invalid_argument("attention: q/k width mismatch");
  if (k.dim(0) != v.dim(0)) throw std::invalid_argument("attention: k/v length mismatch");

  if (kind == AttentionKind::kSoftmax) {
    const float temp = 1.0f / std::sqrt(static_cast<float>(q.dim(1)));
    const Tensor weights = softmax(scale(matmul_transposed(q, k), temp), 1);
    return matmul(weights, v);
  }

  const Tensor fq = elu_plus_one(q), fk = elu_plus_one(k);
  const Tensor kv = matmul(transpose(fk), v);  // d x dv
  Tensor ksum({1, fk.dim(1)});
  for (int64_t i = 0; i < fk.dim(0); ++i)
    for (int64_t j = 0; j < fk.dim(1); ++j) ksum[j] += fk.at(i, j);
  const Tensor num = matmul(fq, kv);
  const Tensor den = matmul_transposed(fq, ksum);  // n x 1, strictly positive
  Tensor out(num.shape());
  for (int64_t i = 0; i < num.dim(0); ++i) {
    const double z = 1.0 / (static_cast<double>(den[i]) + 1e-6);
    for (int64_t j = 0; j < num.dim(1); ++j) out.at(i, j) = static_cast<float>(num.at(i, j) * z);
  }
  return out;
}

Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                           AttentionKind kind) {
  if (heads <= 0 || q.dim(1) % heads != 0 || v.dim(1) % heads != 0) {
    throw std::invalid_argument("multihead_attention: width not divisible by heads");
  }
  if (heads == 1) return attention(q, k, v, kind);
  const int64_t dq = q.dim(1) / heads, dv = v.dim(1) / heads;
  Tensor out({q.dim(0), v.dim(1)});
  for (int h = 0; h < heads; ++h) {
    const Tensor part = attention(slice_cols(q, h * dq, dq), slice_cols(k, h * dq, dq),
                                  slice_cols(v, h * dv, dv), kind);
    for (int64_t i = 0; i < part.dim(0); ++i)
      for (int64_t j = 0; j < dv; ++j) out.at(i, h * dv + j) = part.at(i, j);
  }
  return out;
}

Tensor transformer_layer(const Tensor& x, const Tensor& src, const ModelWeights& w,
                         const std::string& prefix, int heads, AttentionKind kind) {
  if (x.rank() != 2 || src.rank() != 2 || x.dim(1) != src.dim(1)) {
    throw std::invalid_argument("transformer_layer: x and src must share width");
  }
  const Tensor xn = layer_norm(x, w.get(prefix + ".norm_x.gamma"), w.get(prefix + ".norm_x.beta"));
  const Tensor sn =
      layer_norm(src, w.get(prefix + ".norm_src.gamma"), w.get(prefix + ".norm_src.beta"));
  const Tensor q = matmul(xn, w.get(prefix + ".wq"));
  const Tensor k = matmul(sn, w.get(prefix + ".wk"));
  const Tensor v = matmul(sn, w.get(prefix + ".wv"));
  const Tensor message = matmul(multihead_attention(q, k, v, heads, kind), w.get(prefix + ".wo"));
  const Tensor x1 = add(x, message);
  const Tensor hn =
      layer_norm(x1, w.get(prefix + ".norm_ffn.gamma"), w.get(prefix + ".norm_ffn.beta"));
  const Tensor ffn = matmul(relu(matmul(hn, w.get(prefix + ".ffn1"))), w.get(prefix + ".ffn2"));
  return add(x1, ffn);
}

CfiOutput cfi_forward(const FeatureGrid& featA, const FeatureGrid& featB,
                      const ModelWeights& weights) {
  const int d = weights.dims.d_model;
  if (featA.channels() != d || featB.channels() != d) {
    throw std::invalid_argument("cfi_forward: feature channels must equal d_model");
  }
  if (featA.map.shape() != featB.map.shape()) {
    throw std::invalid_argument("cfi_forward: feature grids must share shape");
  }
  const int heads = weights.dims.heads;
  const AttentionKind kind = weights.dims.attention;
  auto layer = [&](const Tensor& x, const Tensor& src, const char* name) {
    return transformer_layer(x, src, weights, name, heads, kind);
  };

  // Encoder: one self + cross set.
  const Tensor a0 = featA.tokens(), b0 = featB.tokens();
  const Tensor a_self = layer(a0, a0, "cfi.self1");
  const Tensor b_self = layer(b0, b0, "cfi.self1");
  const Tensor a1 = layer(a_self, b_self, "cfi.cross1");
  const Tensor b1 = layer(b_self, a_self, "cfi.cross1");

  // Co-visible query decoding.
  const Tensor& query = weights.get("cfi.query");
  const Tensor qa = layer(query, a1, "cfi.decode");
  const Tensor qb = layer(query, b1, "cfi.decode");

  // Cross interaction with the source image's decoded query added to its
  // keys and values.
  const Tensor a2 = layer(a1, add_row_vector(b1, qb), "cfi.guided");
  const Tensor b2 = layer(b1, add_row_vector(a1, qa), "cfi.guided");

  // Final self + cross set.
  const Tensor a2s = layer(a2, a2, "cfi.self2");
  const Tensor b2s = layer(b2, b2, "cfi.self2");
  const Tensor a3 = layer(a2s, b2s, "cfi.cross2");
  const Tensor b3 = layer(b2s, a2s, "cfi.cross2");

  const std::vector<int64_t> shape = featA.map.shape();
  CfiOutput out;
  out.featA2 = FeatureGrid(a2.reshaped(shape), featA.stride);
  out.featB2 = FeatureGrid(b2.reshaped(shape), featB.stride);
  out.featA3 = FeatureGrid(a3.reshaped(shape), featA.stride);
  out.featB3 = FeatureGrid(b3.reshaped(shape), featB.stride);
  out.queryA = qa;
  out.queryB = qb;
  return out;
}

}  // namespace adamatch

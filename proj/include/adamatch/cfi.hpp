#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "adamatch/features.hpp"
#include "adamatch/tensor.hpp"

namespace adamatch {

enum class AttentionKind { kSoftmax = 0, kLinear = 1 };

std::string attention_kind_name(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& name);

struct ModelDims {
  int d_model = 256;   // coarse channels
  int fine_dim = 128;  // fine channels
  int heads = 8;
  AttentionKind attention = AttentionKind::kLinear;
};

// Named parameters for the whole matcher: coarse interaction ("cfi.*"),
// co-visibility head ("covis.*") and the refinement layer ("refine.*").
// Matrices act on row vectors: y = x * W.
struct ModelWeights {
  ModelDims dims;
  std::map<std::string, Tensor> params;

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params.count(name) != 0; }

  bool operator==(const ModelWeights& other) const;
};

// Orthogonal projections; residual output projections carry an extra
// 1/sqrt(d) gain so that an untrained stack stays close to identity.
ModelWeights init_weights(uint64_t seed, const ModelDims& dims = {});
// All projections zero, norms at identity: every block reduces to its
// residual path.
ModelWeights zero_weights(const ModelDims& dims = {});

// q: n x d, k: m x d, v: m x dv. Softmax kind scales logits by 1/sqrt(d);
// linear kind uses the elu(x)+1 feature map.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, AttentionKind kind);

// Multi-head attention: channels are split evenly across heads.
Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           int heads, AttentionKind kind);

// Pre-norm transformer block:
//   x1 = x + Wo * attn(LN(x) Wq, LN(src) Wk, LN(src) Wv)
//   y  = x1 + W2 * relu(W1 * LN(x1))
Tensor transformer_layer(const Tensor& x, const Tensor& src, const ModelWeights& w,
                         const std::string& prefix, int heads, AttentionKind kind);

// Names of the blocks inside the interaction stack, in execution order.
extern const char* const kCfiLayers[6];

struct CfiOutput {
  FeatureGrid featA2, featB2;
  FeatureGrid featA3, featB3;
  Tensor queryA, queryB;  // 1 x d
};

CfiOutput cfi_forward(const FeatureGrid& featA, const FeatureGrid& featB,
                      const ModelWeights& weights);

}  // namespace adamatch

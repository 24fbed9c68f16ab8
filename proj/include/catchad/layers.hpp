#pragma once

// Differentiable building blocks of the network. Every forward has a matching
// backward that accumulates parameter gradients into caller-owned matrices.
//
// Hidden activations are stacked as (groups * N) x d: each consecutive block
// of N rows is one channel set (one frequency patch of one window). Channel
// masks are stacked the same way as (groups * N) x N.

#include "catchad/tensor.hpp"

#include <vector>

namespace catchad::layers {

/// Stand-in for -inf in masked score matrices.
inline constexpr double kMaskedScore = -1e9;

/// y = x * w + b, with b a 1 x out row broadcast over rows.
Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b);

/// Accumulates into gw/gb; writes gx when non-null.
void linear_backward(const Matrix& x, const Matrix& w, const Matrix& gy, Matrix& gw, Matrix* gb,
                     Matrix* gx);

/// Normalization across the N channels of each group, per hidden column.
struct NormCache {
  Matrix normalized;
  Matrix inv_std;  // groups x d
};

inline constexpr double kNormEpsilon = 1e-5;

Matrix channel_layernorm(const Matrix& x, Eigen::Index group, NormCache* cache = nullptr);
Matrix channel_layernorm_backward(const Matrix& gy, Eigen::Index group, const NormCache& cache);

/// Softmax of each row of `logits` where entries are weighted by `mask`
/// (entries with weight 0 receive probability exactly 0). For 0/1 masks this
/// is identical to replacing masked logits with -inf.
Matrix masked_softmax(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& mask);

struct AttentionWeights {
  const Matrix& wq;
  const Matrix& wk;
  const Matrix& wv;
  const Matrix& wo;
  const Matrix& bo;
};

struct AttentionGrads {
  Matrix& wq;
  Matrix& wk;
  Matrix& wv;
  Matrix& wo;
  Matrix& bo;
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  Matrix context;  // concatenated head outputs before the output map
  // Indexed [group * heads + head]; each N x N.
  std::vector<Matrix> raw_scores;  // Q K^T, unscaled
  std::vector<Matrix> probs;
};

/// Multi-head attention restricted by per-group channel masks.
Matrix masked_attention(const Matrix& x, const Matrix& masks, const AttentionWeights& w,
                        int heads, AttentionCache* cache = nullptr);

/// Returns the gradient w.r.t. x. `grad_raw_scores` (optional, same indexing
/// as the cache) adds external gradients on Q K^T. `grad_masks` (optional)
/// accumulates the gradient w.r.t. a continuous relaxation of the masks.
Matrix masked_attention_backward(const Matrix& gy, const Matrix& masks, const AttentionWeights& w,
                                 int heads, const AttentionCache& cache, AttentionGrads g,
                                 const std::vector<Matrix>* grad_raw_scores, Matrix* grad_masks);

struct FeedForwardWeights {
  const Matrix& w1;
  const Matrix& b1;
  const Matrix& w2;
  const Matrix& b2;
};

struct FeedForwardGrads {
  Matrix& w1;
  Matrix& b1;
  Matrix& w2;
  Matrix& b2;
};

struct FeedForwardCache {
  Matrix input;
  Matrix pre;  // x w1 + b1
  Matrix act;  // gelu(pre)
};

Matrix feed_forward(const Matrix& x, const FeedForwardWeights& w, FeedForwardCache* cache = nullptr);
Matrix feed_forward_backward(const Matrix& gy, const FeedForwardWeights& w,
                             const FeedForwardCache& cache, FeedForwardGrads g);

/// Inverted dropout; returns the keep-scale mask (all ones when rate == 0).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

}  // namespace catchad::layers

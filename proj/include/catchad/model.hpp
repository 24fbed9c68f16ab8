#pragma once

#include "catchad/layers.hpp"
#include "catchad/seriesio.hpp"
#include "catchad/spectral.hpp"
#include "catchad/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace catchad {

struct ModelConfig {
  Eigen::Index channels = 5;     // N
  Eigen::Index window = 96;      // T
  Eigen::Index patch_size = 24;  // p, in frequency bins
  Eigen::Index patch_stride = 24;
  Eigen::Index d_model = 64;
  int heads = 4;
  int layers = 2;
  Eigen::Index d_ff = 128;
  double tau = 1.0;
  double dropout = 0.1;

  Eigen::Index bins() const { return rfft_bins(window); }
  Eigen::Index patches() const { return patch_count(bins(), patch_size, patch_stride); }
  Eigen::Index head_dim() const { return d_model / heads; }

  void validate() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

/// Learnable tensors. The mask generator's weight and bias form the mask
/// group; everything else belongs to the model group.
using ModelParams = ParamSet;

namespace param_names {
inline const std::string kProjectionWeight = "patch_projection.weight";
inline const std::string kProjectionBias = "patch_projection.bias";
inline const std::string kMaskWeight = "mask_generator.weight";
inline const std::string kMaskBias = "mask_generator.bias";
inline const std::string kHeadRealWeight = "head_real.weight";
inline const std::string kHeadRealBias = "head_real.bias";
inline const std::string kHeadImagWeight = "head_imag.weight";
inline const std::string kHeadImagBias = "head_imag.bias";
std::string layer(int index, const char* leaf);
}  // namespace param_names

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
ModelParams init_params(const ModelConfig& config, Rng& rng);

/// Throws if any tensor is missing or has the wrong shape for `config`.
void check_params(const ModelParams& params, const ModelConfig& config);

struct ProbabilityMatrix {
  Matrix values;  // N x N, sigmoid outputs
  Eigen::Index patch_index = 0;
};

struct ChannelMask {
  Matrix values;  // N x N, 0/1 with unit diagonal
  Eigen::Index patch_index = 0;
};

struct AttentionTrace {
  std::vector<Matrix> raw_scores;     // per head, Q K^T
  std::vector<Matrix> masked_scores;  // per head, raw where mask = 1, kMaskedScore elsewhere
};

struct PatchTrace {
  ProbabilityMatrix probabilities;
  ChannelMask mask;
  std::vector<AttentionTrace> layers;
};

struct ModelOutput {
  Matrix recon_real;  // N x F
  Matrix recon_imag;  // N x F
  Matrix recon_time;  // N x T
  std::vector<PatchTrace> traces;
};

/// Patch-to-hidden affine map, shared by all patches: [N x 2p] -> [N x d].
Matrix project_patch(const FrequencyPatch& patch, const ModelParams& params);

/// Stacked mask sample for (groups * N) hidden rows.
struct MaskDraw {
  Matrix logits;
  Matrix probs;
  Matrix soft;  // relaxed sample in training, probs in evaluation
  Matrix hard;  // 0/1 with unit diagonal per group
};

/// Training: binary Gumbel-Softmax with a hard straight-through output.
/// Evaluation: probs >= 0.5. Diagonals are forced to 1 in both modes.
MaskDraw draw_masks(const Matrix& hidden, const ModelParams& params, Eigen::Index channels,
                    double tau, bool training, Rng& rng);

/// Straight-through gradient: maps dL/dmask to dL/dlogits.
Matrix mask_logit_grad(const MaskDraw& draw, const Matrix& grad_mask, Eigen::Index channels,
                       double tau, bool training);

std::pair<ProbabilityMatrix, ChannelMask> generate_mask(const Matrix& hidden,
                                                        const ModelParams& params, double tau,
                                                        bool training, Rng& rng);

/// Normalizes every column across the channel rows of `hidden`.
Matrix channel_layernorm(const Matrix& hidden);

std::pair<Matrix, AttentionTrace> masked_attention(const Matrix& hidden, const ChannelMask& mask,
                                                   const ModelParams& params, int layer, int heads);

/// One pre-norm channel-masked transformer layer (dropout off).
Matrix cmt_layer(const Matrix& hidden, const ChannelMask& mask, const ModelParams& params,
                 int layer, const ModelConfig& config);

/// Activations of one transformer layer, kept for backward.
struct CmtCache {
  Matrix input;
  layers::NormCache norm1, norm2;
  layers::AttentionCache attention;
  Matrix attn_dropout;  // empty when dropout is off
  Matrix mid;
  layers::FeedForwardCache ffn;
  Matrix ffn_dropout;
};

/// Stacked form of cmt_layer over (groups * N) rows; dropout applies only
/// when `training` is set.
Matrix cmt_forward(const Matrix& hidden, const Matrix& masks, const ModelParams& params, int layer,
                   const ModelConfig& config, bool training, Rng& rng, CmtCache* cache);

/// Returns dL/dhidden; parameter gradients accumulate into `grads`, mask
/// gradients into `grad_masks` when given. `grad_raw_scores` adds direct
/// gradients on the attention scores.
Matrix cmt_backward(const Matrix& grad_out, const Matrix& masks, const ModelParams& params,
                    int layer, const ModelConfig& config, const CmtCache& cache,
                    ModelParams& grads, const std::vector<Matrix>* grad_raw_scores,
                    Matrix* grad_masks);

/// Activations of a batch forward pass, kept for backward.
struct ForwardState {
  Eigen::Index batch = 0;
  bool training = false;
  Matrix input;      // (B*N) x T
  Matrix spec_real;  // (B*N) x F
  Matrix spec_imag;
  Matrix patches;  // (B*L*N) x 2p
  Matrix hidden0;  // projected patches
  MaskDraw masks;

  std::vector<CmtCache> layers;

  Matrix flat;  // (B*N) x (L*d)
  Matrix recon_real;
  Matrix recon_imag;
  Matrix recon_time;  // (B*N) x T
};

/// Gradients of a scalar objective w.r.t. forward outputs.
struct OutputGrads {
  Matrix recon_time;  // may be empty
  Matrix recon_real;  // may be empty
  Matrix recon_imag;  // may be empty
  // [layer][group * heads + head], may be empty
  std::vector<std::vector<Matrix>> raw_scores;
  Matrix masks;  // (B*L*N) x N, may be empty
};

/// Owns the DFT plan for a configuration; forward is const and reentrant.
class CatchModel {
 public:
  explicit CatchModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const DftPlan& plan() const { return plan_; }

  /// `batch` stacks B windows of N rows each: (B*N) x T.
  ForwardState forward_batch(const Matrix& batch, const ModelParams& params, bool training,
                             Rng& rng) const;

  /// Accumulates parameter gradients into `grads` (same layout as params).
  void backward(const ForwardState& state, const ModelParams& params, const OutputGrads& grads,
                ModelParams& param_grads) const;

  ModelOutput forward(const TimeWindow& window, const ModelParams& params, bool training,
                      Rng& rng) const;

 private:
  ModelConfig config_;
  DftPlan plan_;
};

/// Convenience wrapper constructing a temporary CatchModel.
ModelOutput forward(const TimeWindow& window, const ModelParams& params, const ModelConfig& config,
                    bool training, Rng& rng);

}  // namespace catchad

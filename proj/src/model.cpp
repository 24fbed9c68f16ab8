#include "catchad/model.hpp"

#include <cmath>
#include <stdexcept>

namespace catchad {

using layers::AttentionGrads;
using layers::AttentionWeights;
using layers::FeedForwardGrads;
using layers::FeedForwardWeights;

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (channels < 1) fail("channels must be >= 1");
  if (window < 2) fail("window must be >= 2");
  if (patch_size < 1 || patch_size > bins())
    fail("patch_size must be in [1, " + std::to_string(bins()) + "] for window " +
         std::to_string(window));
  if (patch_stride < 1) fail("patch_stride must be >= 1");
  if (d_model < 1 || heads < 1 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if (layers < 1) fail("layers must be >= 1");
  if (d_ff < 1) fail("d_ff must be >= 1");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.channels == b.channels && a.window == b.window && a.patch_size == b.patch_size &&
         a.patch_stride == b.patch_stride && a.d_model == b.d_model && a.heads == b.heads &&
         a.layers == b.layers && a.d_ff == b.d_ff && a.tau == b.tau && a.dropout == b.dropout;
}

std::string param_names::layer(int index, const char* leaf) {
  return "layers." + std::to_string(index) + "." + leaf;
}

namespace {

using namespace param_names;

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

struct ShapeSpec {
  std::string name;
  Eigen::Index rows, cols;
  Eigen::Index fan_in;
  ParamGroup group;
};

std::vector<ShapeSpec> shapes(const ModelConfig& c) {
  const auto d = c.d_model;
  const auto flat = c.patches() * d;
  std::vector<ShapeSpec> s = {
      {kProjectionWeight, 2 * c.patch_size, d, 2 * c.patch_size, ParamGroup::Model},
      {kProjectionBias, 1, d, 2 * c.patch_size, ParamGroup::Model},
      {kMaskWeight, d, c.channels, d, ParamGroup::Mask},
      {kMaskBias, 1, c.channels, d, ParamGroup::Mask},
  };
  for (int k = 0; k < c.layers; ++k) {
    s.push_back({layer(k, "attn.wq"), d, d, d, ParamGroup::Model});
    s.push_back({layer(k, "attn.wk"), d, d, d, ParamGroup::Model});
    s.push_back({layer(k, "attn.wv"), d, d, d, ParamGroup::Model});
    s.push_back({layer(k, "attn.wo"), d, d, d, ParamGroup::Model});
    s.push_back({layer(k, "attn.bo"), 1, d, d, ParamGroup::Model});
    s.push_back({layer(k, "ffn.w1"), d, c.d_ff, d, ParamGroup::Model});
    s.push_back({layer(k, "ffn.b1"), 1, c.d_ff, d, ParamGroup::Model});
    s.push_back({layer(k, "ffn.w2"), c.d_ff, d, c.d_ff, ParamGroup::Model});
    s.push_back({layer(k, "ffn.b2"), 1, d, c.d_ff, ParamGroup::Model});
  }
  s.push_back({kHeadRealWeight, flat, c.bins(), flat, ParamGroup::Model});
  s.push_back({kHeadRealBias, 1, c.bins(), flat, ParamGroup::Model});
  s.push_back({kHeadImagWeight, flat, c.bins(), flat, ParamGroup::Model});
  s.push_back({kHeadImagBias, 1, c.bins(), flat, ParamGroup::Model});
  return s;
}

AttentionWeights attention_weights(const ModelParams& p, int k) {
  return {p.at(layer(k, "attn.wq")), p.at(layer(k, "attn.wk")), p.at(layer(k, "attn.wv")),
          p.at(layer(k, "attn.wo")), p.at(layer(k, "attn.bo"))};
}

AttentionGrads attention_grads(ModelParams& g, int k) {
  return {g.at(layer(k, "attn.wq")), g.at(layer(k, "attn.wk")), g.at(layer(k, "attn.wv")),
          g.at(layer(k, "attn.wo")), g.at(layer(k, "attn.bo"))};
}

FeedForwardWeights ffn_weights(const ModelParams& p, int k) {
  return {p.at(layer(k, "ffn.w1")), p.at(layer(k, "ffn.b1")), p.at(layer(k, "ffn.w2")),
          p.at(layer(k, "ffn.b2"))};
}

FeedForwardGrads ffn_grads(ModelParams& g, int k) {
  return {g.at(layer(k, "ffn.w1")), g.at(layer(k, "ffn.b1")), g.at(layer(k, "ffn.w2")),
          g.at(layer(k, "ffn.b2"))};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AttentionTrace make_trace(const layers::AttentionCache& cache, const Matrix& mask,
                          Eigen::Index group, int heads) {
  AttentionTrace trace;
  for (int h = 0; h < heads; ++h) {
    const Matrix& raw = cache.raw_scores[static_cast<std::size_t>(group * heads + h)];
    Matrix masked = raw;
    for (Eigen::Index r = 0; r < raw.rows(); ++r)
      for (Eigen::Index c = 0; c < raw.cols(); ++c)
        if (!(mask(r, c) > 0.0)) masked(r, c) = layers::kMaskedScore;
    trace.raw_scores.push_back(raw);
    trace.masked_scores.push_back(std::move(masked));
  }
  return trace;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams params;
  for (const auto& s : shapes(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    params.add(s.name, uniform(s.rows, s.cols, bound, rng), s.group);
  }
  return params;
}

void check_params(const ModelParams& params, const ModelConfig& config) {
  const auto expected = shapes(config);
  if (params.size() != expected.size()) {
    throw std::invalid_argument("parameter set has " + std::to_string(params.size()) +
                                " tensors, configuration expects " +
                                std::to_string(expected.size()));
  }
  for (const auto& s : expected) {
    if (!params.contains(s.name)) throw std::invalid_argument("missing parameter tensor " + s.name);
    const auto& m = params.at(s.name);
    if (m.rows() != s.rows || m.cols() != s.cols) {
      throw std::invalid_argument("parameter " + s.name + " has shape " + std::to_string(m.rows()) +
                                  "x" + std::to_string(m.cols()) + ", expected " +
                                  std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
  }
}

Matrix project_patch(const FrequencyPatch& patch, const ModelParams& params) {
  const auto& w = params.at(kProjectionWeight);
  if (patch.joint.cols() != w.rows()) {
    throw std::invalid_argument("project_patch: patch width " + std::to_string(patch.joint.cols()) +
                                " does not match projection input " + std::to_string(w.rows()));
  }
  return layers::linear(patch.joint, w, params.at(kProjectionBias));
}

MaskDraw draw_masks(const Matrix& hidden, const ModelParams& params, Eigen::Index channels,
                    double tau, bool training, Rng& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("mask temperature must be > 0");
  if (hidden.rows() % channels != 0)
    throw std::invalid_argument("draw_masks: row count is not a multiple of the channel count");
  MaskDraw draw;
  draw.logits = layers::linear(hidden, params.at(kMaskWeight), params.at(kMaskBias));
  const auto rows = draw.logits.rows();
  const auto n = draw.logits.cols();
  if (n != channels) throw std::invalid_argument("draw_masks: generator width != channel count");
  draw.probs = draw.logits.unaryExpr([](double v) { return sigmoid(v); });
  draw.soft.resize(rows, n);
  draw.hard.resize(rows, n);
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (training) {
        // two-class Gumbel-Softmax over {keep, drop}; the class logit gap is
        // log p - log(1 - p) = logit
        const double g_keep = -std::log(-std::log(u(rng)));
        const double g_drop = -std::log(-std::log(u(rng)));
        const double y = (draw.logits(r, c) + g_keep - g_drop) / tau;
        draw.soft(r, c) = sigmoid(y);
        draw.hard(r, c) = y > 0.0 ? 1.0 : 0.0;
      } else {
        draw.soft(r, c) = draw.probs(r, c);
        draw.hard(r, c) = draw.probs(r, c) >= 0.5 ? 1.0 : 0.0;
      }
    }
    const auto diag = r % channels;
    draw.soft(r, diag) = 1.0;
    draw.hard(r, diag) = 1.0;
  }
  return draw;
}

Matrix mask_logit_grad(const MaskDraw& draw, const Matrix& grad_mask, Eigen::Index channels,
                       double tau, bool training) {
  Matrix g(grad_mask.rows(), grad_mask.cols());
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (c == r % channels) {
        g(r, c) = 0.0;
        continue;
      }
      const double s = training ? draw.soft(r, c) : draw.probs(r, c);
      g(r, c) = grad_mask(r, c) * s * (1.0 - s) / (training ? tau : 1.0);
    }
  }
  return g;
}

std::pair<ProbabilityMatrix, ChannelMask> generate_mask(const Matrix& hidden,
                                                        const ModelParams& params, double tau,
                                                        bool training, Rng& rng) {
  auto draw = draw_masks(hidden, params, hidden.rows(), tau, training, rng);
  return {ProbabilityMatrix{std::move(draw.probs), 0}, ChannelMask{std::move(draw.hard), 0}};
}

Matrix channel_layernorm(const Matrix& hidden) {
  return layers::channel_layernorm(hidden, hidden.rows());
}

std::pair<Matrix, AttentionTrace> masked_attention(const Matrix& hidden, const ChannelMask& mask,
                                                   const ModelParams& params, int layer,
                                                   int heads) {
  layers::AttentionCache cache;
  Matrix out =
      layers::masked_attention(hidden, mask.values, attention_weights(params, layer), heads, &cache);
  return {std::move(out), make_trace(cache, mask.values, 0, heads)};
}

Matrix cmt_layer(const Matrix& hidden, const ChannelMask& mask, const ModelParams& params,
                 int layer, const ModelConfig& config) {
  const auto n = hidden.rows();
  Matrix mid = hidden + layers::masked_attention(layers::channel_layernorm(hidden, n), mask.values,
                                                 attention_weights(params, layer), config.heads);
  return mid + layers::feed_forward(layers::channel_layernorm(mid, n), ffn_weights(params, layer));
}

CatchModel::CatchModel(ModelConfig config) : config_(config), plan_(config.window) {
  config_.validate();
}

Matrix cmt_forward(const Matrix& hidden, const Matrix& masks, const ModelParams& params, int layer,
                   const ModelConfig& config, bool training, Rng& rng, CmtCache* cache) {
  const auto n = config.channels;
  const bool drop = training && config.dropout > 0.0;
  CmtCache local;
  CmtCache& ly = cache ? *cache : local;
  ly.input = hidden;
  Matrix att = layers::masked_attention(layers::channel_layernorm(hidden, n, &ly.norm1), masks,
                                        attention_weights(params, layer), config.heads, &ly.attention);
  ly.attn_dropout.resize(0, 0);
  ly.ffn_dropout.resize(0, 0);
  if (drop) {
    ly.attn_dropout = layers::dropout_mask(att.rows(), att.cols(), config.dropout, rng);
    att.array() *= ly.attn_dropout.array();
  }
  ly.mid = hidden + att;
  Matrix f = layers::feed_forward(layers::channel_layernorm(ly.mid, n, &ly.norm2),
                                  ffn_weights(params, layer), &ly.ffn);
  if (drop) {
    ly.ffn_dropout = layers::dropout_mask(f.rows(), f.cols(), config.dropout, rng);
    f.array() *= ly.ffn_dropout.array();
  }
  return ly.mid + f;
}

Matrix cmt_backward(const Matrix& grad_out, const Matrix& masks, const ModelParams& params,
                    int layer, const ModelConfig& config, const CmtCache& ly, ModelParams& grads,
                    const std::vector<Matrix>* grad_raw_scores, Matrix* grad_masks) {
  const auto n = config.channels;
  Matrix g_f = grad_out;
  if (ly.ffn_dropout.size()) g_f.array() *= ly.ffn_dropout.array();
  Matrix g_a2 = layers::feed_forward_backward(g_f, ffn_weights(params, layer), ly.ffn, ffn_grads(grads, layer));
  Matrix g_mid = grad_out + layers::channel_layernorm_backward(g_a2, n, ly.norm2);
  Matrix g_att = g_mid;
  if (ly.attn_dropout.size()) g_att.array() *= ly.attn_dropout.array();
  Matrix g_a1 = layers::masked_attention_backward(g_att, masks, attention_weights(params, layer), config.heads,
                                                  ly.attention, attention_grads(grads, layer),
                                                  grad_raw_scores, grad_masks);
  return g_mid + layers::channel_layernorm_backward(g_a1, n, ly.norm1);
}

ForwardState CatchModel::forward_batch(const Matrix& batch, const ModelParams& params,
                                       bool training, Rng& rng) const {
  const auto& c = config_;
  const auto n = c.channels;
  const auto patches = c.patches();
  const auto p = c.patch_size;
  const auto d = c.d_model;
  if (batch.cols() != c.window || batch.rows() % n != 0 || batch.rows() == 0) {
    throw std::invalid_argument("forward: batch of shape " + std::to_string(batch.rows()) + "x" +
                                std::to_string(batch.cols()) + " does not match N=" +
                                std::to_string(n) + ", T=" + std::to_string(c.window));
  }
  ForwardState st;
  st.batch = batch.rows() / n;
  st.training = training;
  st.input = batch;
  plan_.forward(batch, st.spec_real, st.spec_imag);

  st.patches.resize(st.batch * patches * n, 2 * p);
  for (Eigen::Index b = 0; b < st.batch; ++b) {
    for (Eigen::Index i = 0; i < patches; ++i) {
      for (Eigen::Index ch = 0; ch < n; ++ch) {
        const auto row = (b * patches + i) * n + ch;
        const auto src = b * n + ch;
        st.patches.row(row).head(p) = st.spec_real.row(src).segment(i * c.patch_stride, p);
        st.patches.row(row).tail(p) = st.spec_imag.row(src).segment(i * c.patch_stride, p);
      }
    }
  }
  st.hidden0 =
      layers::linear(st.patches, params.at(kProjectionWeight), params.at(kProjectionBias));
  st.masks = draw_masks(st.hidden0, params, n, c.tau, training, rng);

  Matrix h = st.hidden0;
  st.layers.resize(static_cast<std::size_t>(c.layers));
  for (int k = 0; k < c.layers; ++k)
    h = cmt_forward(h, st.masks.hard, params, k, c, training, rng, &st.layers[static_cast<std::size_t>(k)]);

  st.flat.resize(st.batch * n, patches * d);
  for (Eigen::Index b = 0; b < st.batch; ++b)
    for (Eigen::Index i = 0; i < patches; ++i)
      st.flat.block(b * n, i * d, n, d) = h.middleRows((b * patches + i) * n, n);
  st.recon_real = layers::linear(st.flat, params.at(kHeadRealWeight), params.at(kHeadRealBias));
  st.recon_imag = layers::linear(st.flat, params.at(kHeadImagWeight), params.at(kHeadImagBias));
  st.recon_time = plan_.inverse(st.recon_real, st.recon_imag);
  return st;
}

void CatchModel::backward(const ForwardState& st, const ModelParams& params,
                          const OutputGrads& grads, ModelParams& pg) const {
  const auto& c = config_;
  const auto n = c.channels;
  const auto patches = c.patches();
  const auto d = c.d_model;
  const auto bins = c.bins();
  const auto rows = st.batch * n;

  Matrix g_real = grads.recon_real.size() ? grads.recon_real : Matrix::Zero(rows, bins);
  Matrix g_imag = grads.recon_imag.size() ? grads.recon_imag : Matrix::Zero(rows, bins);
  if (grads.recon_time.size()) {
    g_real.noalias() += grads.recon_time * plan_.inverse_cos().transpose();
    g_imag.noalias() += grads.recon_time * plan_.inverse_sin().transpose();
  }

  Matrix g_flat, g_flat_imag;
  layers::linear_backward(st.flat, params.at(kHeadRealWeight), g_real, pg.at(kHeadRealWeight),
                          &pg.at(kHeadRealBias), &g_flat);
  layers::linear_backward(st.flat, params.at(kHeadImagWeight), g_imag, pg.at(kHeadImagWeight),
                          &pg.at(kHeadImagBias), &g_flat_imag);
  g_flat += g_flat_imag;

  Matrix gh(st.batch * patches * n, d);
  for (Eigen::Index b = 0; b < st.batch; ++b)
    for (Eigen::Index i = 0; i < patches; ++i)
      gh.middleRows((b * patches + i) * n, n) = g_flat.block(b * n, i * d, n, d);

  Matrix g_mask = grads.masks.size() ? grads.masks : Matrix::Zero(st.masks.hard.rows(), n);
  for (int k = c.layers - 1; k >= 0; --k) {
    const std::vector<Matrix>* ext = nullptr;
    if (static_cast<int>(grads.raw_scores.size()) > k && !grads.raw_scores[static_cast<std::size_t>(k)].empty())
      ext = &grads.raw_scores[static_cast<std::size_t>(k)];
    gh = cmt_backward(gh, st.masks.hard, params, k, c, st.layers[static_cast<std::size_t>(k)], pg, ext, &g_mask);
  }

  const Matrix g_logits = mask_logit_grad(st.masks, g_mask, n, c.tau, st.training);
  Matrix g_h0_mask;
  layers::linear_backward(st.hidden0, params.at(kMaskWeight), g_logits, pg.at(kMaskWeight),
                          &pg.at(kMaskBias), &g_h0_mask);
  gh += g_h0_mask;
  layers::linear_backward(st.patches, params.at(kProjectionWeight), gh, pg.at(kProjectionWeight),
                          &pg.at(kProjectionBias), nullptr);
}

ModelOutput CatchModel::forward(const TimeWindow& window, const ModelParams& params, bool training,
                                Rng& rng) const {
  auto st = forward_batch(window.values, params, training, rng);
  ModelOutput out;
  out.recon_real = std::move(st.recon_real);
  out.recon_imag = std::move(st.recon_imag);
  out.recon_time = std::move(st.recon_time);
  const auto n = config_.channels;
  for (Eigen::Index i = 0; i < config_.patches(); ++i) {
    PatchTrace trace;
    trace.probabilities = {st.masks.probs.middleRows(i * n, n), i};
    trace.mask = {st.masks.hard.middleRows(i * n, n), i};
    for (const auto& ly : st.layers)
      trace.layers.push_back(make_trace(ly.attention, trace.mask.values, i, config_.heads));
    out.traces.push_back(std::move(trace));
  }
  return out;
}

ModelOutput forward(const TimeWindow& window, const ModelParams& params, const ModelConfig& config,
                    bool training, Rng& rng) {
  return CatchModel(config).forward(window, params, training, rng);
}

}  // namespace catchad

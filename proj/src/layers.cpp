#include "catchad/layers.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace catchad::layers {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

void check_groups(const Matrix& x, Eigen::Index group) {
  if (group < 1 || x.rows() % group != 0)
    throw std::invalid_argument("row count is not a multiple of the channel count");
}

}  // namespace

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.rows() || b.cols() != w.cols())
    throw std::invalid_argument("linear: input width does not match weight shape");
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

void linear_backward(const Matrix& x, const Matrix& w, const Matrix& gy, Matrix& gw, Matrix* gb,
                     Matrix* gx) {
  gw.noalias() += x.transpose() * gy;
  if (gb) *gb += gy.colwise().sum();
  if (gx) gx->noalias() = gy * w.transpose();
}

Matrix channel_layernorm(const Matrix& x, Eigen::Index group, NormCache* cache) {
  check_groups(x, group);
  const auto groups = x.rows() / group;
  Matrix y(x.rows(), x.cols());
  Matrix inv_std(groups, x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    auto block = x.middleRows(g * group, group);
    const RowVector mean = block.colwise().mean();
    Matrix centered = block.rowwise() - mean;
    const RowVector var = centered.array().square().colwise().mean();
    const RowVector inv = (var.array() + kNormEpsilon).rsqrt();
    inv_std.row(g) = inv;
    y.middleRows(g * group, group) = centered.array().rowwise() * inv.array();
  }
  if (cache) {
    cache->normalized = y;
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix channel_layernorm_backward(const Matrix& gy, Eigen::Index group, const NormCache& cache) {
  check_groups(gy, group);
  const auto groups = gy.rows() / group;
  Matrix gx(gy.rows(), gy.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    auto gyb = gy.middleRows(g * group, group);
    auto yb = cache.normalized.middleRows(g * group, group);
    const RowVector mean_gy = gyb.colwise().mean();
    const RowVector mean_gy_y = gyb.cwiseProduct(yb).colwise().mean();
    Matrix t = gyb.rowwise() - mean_gy;
    t -= (yb.array().rowwise() * mean_gy_y.array()).matrix();
    gx.middleRows(g * group, group) = t.array().rowwise() * cache.inv_std.row(g).array();
  }
  return gx;
}

Matrix masked_softmax(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& mask) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (mask(r, c) > 0.0) mx = std::max(mx, logits(r, c));
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = mask(r, c) > 0.0 ? mask(r, c) * std::exp(logits(r, c) - mx) : 0.0;
      p(r, c) = e;
      z += e;
    }
    if (!(z > 0.0)) throw std::domain_error("masked_softmax: row has no unmasked entry");
    p.row(r) /= z;
  }
  return p;
}

Matrix masked_attention(const Matrix& x, const Matrix& masks, const AttentionWeights& w,
                        int heads, AttentionCache* cache) {
  const auto n = masks.cols();
  check_groups(x, n);
  if (masks.rows() != x.rows()) throw std::invalid_argument("masked_attention: mask rows != input rows");
  const auto d = w.wq.cols();
  if (heads < 1 || d % heads != 0)
    throw std::invalid_argument("masked_attention: hidden width not divisible by head count");
  const auto dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto groups = x.rows() / n;

  Matrix q = x * w.wq;
  Matrix k = x * w.wk;
  Matrix v = x * w.wv;
  Matrix context(x.rows(), d);
  std::vector<Matrix> raw, probs;
  if (cache) {
    raw.reserve(static_cast<std::size_t>(groups * heads));
    probs.reserve(static_cast<std::size_t>(groups * heads));
  }
  for (Eigen::Index g = 0; g < groups; ++g) {
    auto m = masks.middleRows(g * n, n);
    for (int h = 0; h < heads; ++h) {
      auto qh = q.block(g * n, h * dh, n, dh);
      auto kh = k.block(g * n, h * dh, n, dh);
      auto vh = v.block(g * n, h * dh, n, dh);
      Matrix scores = qh * kh.transpose();
      Matrix p = masked_softmax(scores * scale, m);
      context.block(g * n, h * dh, n, dh).noalias() = p * vh;
      if (cache) {
        raw.push_back(std::move(scores));
        probs.push_back(std::move(p));
      }
    }
  }
  Matrix y = linear(context, w.wo, w.bo);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
    cache->raw_scores = std::move(raw);
    cache->probs = std::move(probs);
  }
  return y;
}

Matrix masked_attention_backward(const Matrix& gy, const Matrix& masks, const AttentionWeights& w,
                                 int heads, const AttentionCache& cache, AttentionGrads g,
                                 const std::vector<Matrix>* grad_raw_scores, Matrix* grad_masks) {
  const auto n = masks.cols();
  const auto d = w.wq.cols();
  const auto dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto groups = gy.rows() / n;

  if (grad_masks && grad_masks->size() == 0) grad_masks->setZero(masks.rows(), n);
  Matrix g_context;
  linear_backward(cache.context, w.wo, gy, g.wo, &g.bo, &g_context);

  Matrix gq(gy.rows(), d), gk(gy.rows(), d), gv(gy.rows(), d);
  for (Eigen::Index grp = 0; grp < groups; ++grp) {
    auto m = masks.middleRows(grp * n, n);
    for (int h = 0; h < heads; ++h) {
      const auto idx = static_cast<std::size_t>(grp * heads + h);
      const Matrix& p = cache.probs[idx];
      const Matrix& raw = cache.raw_scores[idx];
      auto qh = cache.q.block(grp * n, h * dh, n, dh);
      auto kh = cache.k.block(grp * n, h * dh, n, dh);
      auto vh = cache.v.block(grp * n, h * dh, n, dh);
      auto go = g_context.block(grp * n, h * dh, n, dh);

      const Matrix gp = go * vh.transpose();
      gv.block(grp * n, h * dh, n, dh).noalias() = p.transpose() * go;

      const Vector row_dot = p.cwiseProduct(gp).rowwise().sum();
      Matrix gscores = (p.array() * (gp.colwise() - row_dot).array()).matrix() * scale;
      if (grad_raw_scores) gscores += (*grad_raw_scores)[idx];

      if (grad_masks) {
        // d p_kj / d m_kl = (e_kl / z_k) (delta_jl - p_kj) with e = exp(scaled - rowmax)
        for (Eigen::Index r = 0; r < n; ++r) {
          double mx = -std::numeric_limits<double>::infinity();
          for (Eigen::Index c = 0; c < n; ++c)
            if (m(r, c) > 0.0) mx = std::max(mx, raw(r, c) * scale);
          double z = 0.0;
          for (Eigen::Index c = 0; c < n; ++c)
            if (m(r, c) > 0.0) z += m(r, c) * std::exp(raw(r, c) * scale - mx);
          for (Eigen::Index c = 0; c < n; ++c) {
            const double e = std::exp(raw(r, c) * scale - mx);
            (*grad_masks)(grp * n + r, c) += e / z * (gp(r, c) - row_dot(r));
          }
        }
      }

      gq.block(grp * n, h * dh, n, dh).noalias() = gscores * kh;
      gk.block(grp * n, h * dh, n, dh).noalias() = gscores.transpose() * qh;
    }
  }

  g.wq.noalias() += cache.input.transpose() * gq;
  g.wk.noalias() += cache.input.transpose() * gk;
  g.wv.noalias() += cache.input.transpose() * gv;
  Matrix gx = gq * w.wq.transpose();
  gx.noalias() += gk * w.wk.transpose();
  gx.noalias() += gv * w.wv.transpose();
  return gx;
}

Matrix feed_forward(const Matrix& x, const FeedForwardWeights& w, FeedForwardCache* cache) {
  Matrix pre = linear(x, w.w1, w.b1);
  Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
  Matrix y = linear(act, w.w2, w.b2);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

Matrix feed_forward_backward(const Matrix& gy, const FeedForwardWeights& w,
                             const FeedForwardCache& cache, FeedForwardGrads g) {
  Matrix g_act;
  linear_backward(cache.act, w.w2, gy, g.w2, &g.b2, &g_act);
  Matrix g_pre = g_act.cwiseProduct(cache.pre.unaryExpr([](double v) { return gelu_grad(v); }));
  Matrix gx;
  linear_backward(cache.input, w.w1, g_pre, g.w1, &g.b1, &gx);
  return gx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix keep = Matrix::Ones(rows, cols);
  if (rate <= 0.0) return keep;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) keep(r, c) = u(rng) < rate ? 0.0 : scale;
  return keep;
}

}  // namespace catchad::layers

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catchad/model.hpp"
#include "support/gradchecks.hpp"
#include "support/oracles.hpp"

using namespace catchad;
namespace pn = catchad::param_names;

namespace {

ModelConfig small_config(Eigen::Index channels = 3, Eigen::Index d = 8, int heads = 2) {
  ModelConfig c;
  c.channels = channels;
  c.window = 16;
  c.patch_size = 4;
  c.patch_stride = 4;
  c.d_model = d;
  c.heads = heads;
  c.layers = 2;
  c.d_ff = 8;
  c.dropout = 0.0;
  return c;
}

void zero_all(ModelParams& p) {
  for (auto& t : p.tensors()) t.value.setZero();
}

ModelParams params_for(const ModelConfig& c, std::uint64_t seed = 1) {
  Rng rng(seed);
  return init_params(c, rng);
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.d_model = 7;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.patch_size = 20;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS(c.validate());
  ModelConfig defaults;
  CHECK(defaults.bins() == 49);
  CHECK(defaults.patches() == 2);
}

TEST_CASE("parameter layout") {
  const auto c = small_config();
  auto p = params_for(c);
  CHECK_NOTHROW(check_params(p, c));
  CHECK(p.at(pn::kMaskWeight).rows() == c.d_model);
  CHECK(p.at(pn::kMaskWeight).cols() == c.channels);
  CHECK(p.at(pn::kHeadRealWeight).rows() == c.patches() * c.d_model);
  CHECK(p.at(pn::kHeadRealWeight).cols() == c.bins());
  p.at(pn::kHeadImagBias).resize(1, 3);
  CHECK_THROWS(check_params(p, c));
}

TEST_CASE("project_patch") {
  const auto c = small_config(3, 8);
  auto p = params_for(c);
  Rng rng(4);
  SUBCASE("zero patch, zero bias") {
    p.at(pn::kProjectionBias).setZero();
    const auto patch = concat_real_imag(Matrix::Zero(3, 4), Matrix::Zero(3, 4));
    CHECK(project_patch(patch, p).isZero());
  }
  SUBCASE("identity map") {
    p.at(pn::kProjectionWeight) = Matrix::Identity(8, 8);
    p.at(pn::kProjectionBias).setZero();
    const auto patch = concat_real_imag(oracle::random_matrix(3, 4, rng), oracle::random_matrix(3, 4, rng));
    CHECK(project_patch(patch, p) == patch.joint);
  }
  SUBCASE("explicit product") {
    const auto patch = concat_real_imag(oracle::random_matrix(3, 4, rng), oracle::random_matrix(3, 4, rng));
    const Matrix& w = p.at(pn::kProjectionWeight);
    const Matrix& b = p.at(pn::kProjectionBias);
    Matrix expect(3, 8);
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < 8; ++j) {
        double acc = b(0, j);
        for (int k = 0; k < 8; ++k) acc += patch.joint(r, k) * w(k, j);
        expect(r, j) = acc;
      }
    CHECK((project_patch(patch, p) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch") {
    const auto patch = concat_real_imag(Matrix::Zero(3, 3), Matrix::Zero(3, 3));
    CHECK_THROWS(project_patch(patch, p));
  }
}

TEST_CASE("generate_mask saturation and determinism") {
  const auto c = small_config(4, 8);
  auto p = params_for(c);
  Rng rng(2);
  const Matrix h = oracle::random_matrix(4, 8, rng);
  p.at(pn::kMaskWeight).setZero();

  p.at(pn::kMaskBias).setConstant(50.0);
  for (bool training : {true, false}) {
    Rng r(3);
    const auto [d, m] = generate_mask(h, p, 1.0, training, r);
    CHECK((d.values.array() > 0.999).all());
    CHECK(m.values == Matrix::Ones(4, 4));
  }
  p.at(pn::kMaskBias).setConstant(-50.0);
  for (bool training : {true, false}) {
    Rng r(3);
    CHECK(generate_mask(h, p, 1.0, training, r).second.values == Matrix::Identity(4, 4));
  }

  p = params_for(c, 9);
  Rng a(17), b(17);
  CHECK(generate_mask(h, p, 0.7, true, a).second.values == generate_mask(h, p, 0.7, true, b).second.values);
  Rng e(0);
  const auto [probs, eval_mask] = generate_mask(h, p, 1.0, false, e);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      CHECK(eval_mask.values(i, j) == (i == j || probs.values(i, j) >= 0.5 ? 1.0 : 0.0));
}

TEST_CASE("straight-through gradient equals the soft relaxation's derivative") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Eigen::Index n = 3, d = 5;
    ModelConfig c = small_config(n, 6, 2);
    auto p = params_for(c, seed);
    p.at(pn::kMaskWeight) = oracle::random_matrix(d, n, rng);
    const Matrix h = oracle::random_matrix(2 * n, d, rng);
    Matrix coeff = oracle::random_matrix(2 * n, n, rng);
    for (Eigen::Index r = 0; r < coeff.rows(); ++r) coeff(r, r % n) = 0.0;
    const double tau = 0.8;

    auto f = [&] {
      Rng r(99);
      return draw_masks(h, p, n, tau, true, r).soft.cwiseProduct(coeff).sum();
    };
    Rng r(99);
    const auto draw = draw_masks(h, p, n, tau, true, r);
    const Matrix g_logits = mask_logit_grad(draw, coeff, n, tau, true);
    const Matrix analytic = h.transpose() * g_logits;
    CHECK(analytic.norm() > 0.0);
    const Matrix numeric = oracle::numeric_gradient(f, p.at(pn::kMaskWeight), 1e-4);
    CHECK(oracle::relative_error(analytic, numeric) < 1e-3);
  }
}

TEST_CASE("channel_layernorm") {
  SUBCASE("identical rows") {
    Matrix h(3, 4);
    h.rowwise() = RowVector::LinSpaced(4, -1, 2);
    CHECK(channel_layernorm(h).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two opposite channels") {
    Matrix h(2, 3);
    h << 2.0, -0.5, 3.0, -2.0, 0.5, -3.0;
    const Matrix y = channel_layernorm(h);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double a = h(0, j);
      const double expect = a / std::sqrt(a * a + 1e-5);
      CHECK(y(0, j) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(y(1, j) == doctest::Approx(-expect).epsilon(1e-12));
    }
  }
  SUBCASE("normalized columns stay put") {
    Matrix h(2, 2);
    h << 1, -1, -1, 1;
    CHECK((channel_layernorm(h) - h).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("masked_attention reductions") {
  Rng rng(8);
  const auto c = small_config(4, 8, 2);
  auto p = params_for(c, 3);
  const Matrix h = oracle::random_matrix(4, 8, rng);
  const std::string wo = pn::layer(0, "attn.wo"), bo = pn::layer(0, "attn.bo"), wv = pn::layer(0, "attn.wv");

  SUBCASE("identity mask gives V row-wise") {
    p.at(wo) = Matrix::Identity(8, 8);
    p.at(bo).setZero();
    const auto [out, trace] = masked_attention(h, ChannelMask{Matrix::Identity(4, 4), 0}, p, 0, 2);
    CHECK(out == h * p.at(wv));
    REQUIRE(trace.masked_scores.size() == 2);
    CHECK(trace.masked_scores[0](0, 1) == layers::kMaskedScore);
    CHECK(trace.masked_scores[0](2, 2) == trace.raw_scores[0](2, 2));
  }
  SUBCASE("all-ones mask equals plain attention") {
    const auto [out, trace] = masked_attention(h, ChannelMask{Matrix::Ones(4, 4), 0}, p, 0, 2);
    const Matrix q = h * p.at(pn::layer(0, "attn.wq")), k = h * p.at(pn::layer(0, "attn.wk")), v = h * p.at(wv);
    Matrix ctx(4, 8);
    for (int head = 0; head < 2; ++head) {
      const Matrix s = q.middleCols(4 * head, 4) * k.middleCols(4 * head, 4).transpose() / 2.0;
      Matrix e = (s.colwise() - s.rowwise().maxCoeff()).array().exp();
      e = e.array().colwise() / e.rowwise().sum().array();
      ctx.middleCols(4 * head, 4) = e * v.middleCols(4 * head, 4);
    }
    const Matrix ref = (ctx * p.at(wo)).rowwise() + p.at(bo).row(0);
    CHECK((out - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("masked_attention hand-computed N=2 d=1") {
  ModelConfig c = small_config(2, 1, 1);
  c.patch_size = 2;
  auto p = params_for(c);
  for (const char* leaf : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) p.at(pn::layer(0, leaf)) = Matrix::Ones(1, 1);
  p.at(pn::layer(0, "attn.wv"))(0, 0) = 3.0;
  p.at(pn::layer(0, "attn.bo")).setZero();
  Matrix h(2, 1);
  h << 1.0, 2.0;
  const double e = std::exp(1.0);
  // row 0 scores [1, 2], row 1 scores [2, 4]; values [3, 6]
  const double out0 = (3.0 * 1.0 + 6.0 * e) / (1.0 + e);
  const double out1 = (3.0 * 1.0 + 6.0 * e * e) / (1.0 + e * e);
  const auto full = masked_attention(h, ChannelMask{Matrix::Ones(2, 2), 0}, p, 0, 1).first;
  CHECK(std::abs(full(0, 0) - out0) < 1e-12);
  CHECK(std::abs(full(1, 0) - out1) < 1e-12);
  Matrix half(2, 2);
  half << 1, 0, 1, 1;
  const auto masked = masked_attention(h, ChannelMask{half, 0}, p, 0, 1).first;
  CHECK(std::abs(masked(0, 0) - 3.0) < 1e-12);
  CHECK(std::abs(masked(1, 0) - out1) < 1e-12);
}

TEST_CASE("cmt_layer compositions") {
  Rng rng(12);
  const auto c = small_config(3, 8, 2);
  const Matrix h = oracle::random_matrix(3, 8, rng);
  const ChannelMask mask{Matrix::Ones(3, 3), 0};
  auto zero = params_for(c);
  zero_all(zero);
  CHECK(cmt_layer(h, mask, zero, 0, c) == h);
  CHECK(cmt_layer(cmt_layer(h, mask, zero, 0, c), mask, zero, 1, c) == h);

  auto p = params_for(c, 5);
  for (const char* leaf : {"ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2"}) p.at(pn::layer(0, leaf)).setZero();
  const Matrix expect = h + masked_attention(channel_layernorm(h), mask, p, 0, 2).first;
  CHECK((cmt_layer(h, mask, p, 0, c) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward") {
  const auto c = small_config(3, 8, 2);
  Rng rng(21);
  TimeWindow w;
  w.values = oracle::random_matrix(3, 16, rng);

  SUBCASE("zero in, zero out") {
    auto p = params_for(c);
    for (auto& t : p.tensors())
      if (t.name.find("bias") != std::string::npos || t.name.find(".b") != std::string::npos) t.value.setZero();
    TimeWindow z;
    z.values = Matrix::Zero(3, 16);
    Rng r(0);
    const auto out = forward(z, p, c, false, r);
    CHECK(out.recon_time.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.recon_real.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("single channel") {
    const auto c1 = small_config(1, 8, 2);
    auto p = params_for(c1);
    TimeWindow one;
    one.values = w.values.topRows(1);
    for (bool training : {true, false}) {
      Rng r(1);
      const auto out = forward(one, p, c1, training, r);
      for (const auto& t : out.traces) CHECK(t.mask.values == Matrix::Ones(1, 1));
    }
  }
  SUBCASE("deterministic under a seed") {
    ModelConfig cd = c;
    cd.dropout = 0.2;
    auto p = params_for(cd);
    Rng a(5), b(5);
    const auto x = forward(w, p, cd, true, a), y = forward(w, p, cd, true, b);
    CHECK(std::memcmp(x.recon_time.data(), y.recon_time.data(), sizeof(double) * x.recon_time.size()) == 0);
    CHECK(x.traces.size() == static_cast<std::size_t>(cd.patches()));
    for (std::size_t i = 0; i < x.traces.size(); ++i) CHECK(x.traces[i].mask.values == y.traces[i].mask.values);
  }
  SUBCASE("channel permutation with a dense mask") {
    auto p = params_for(c);
    p.at(pn::kMaskWeight).setZero();
    p.at(pn::kMaskBias).setConstant(50.0);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
    perm.indices() << 2, 0, 1;
    TimeWindow pw;
    pw.values = perm * w.values;
    Rng a(0), b(0);
    const auto base = forward(w, p, c, false, a);
    const auto permuted = forward(pw, p, c, false, b);
    CHECK((perm.transpose() * permuted.recon_time - base.recon_time).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("shape mismatch") {
    auto p = params_for(c);
    TimeWindow bad;
    bad.values = Matrix::Zero(2, 16);
    Rng r(0);
    CHECK_THROWS(forward(bad, p, c, false, r));
    bad.values = Matrix::Zero(3, 12);
    CHECK_THROWS(forward(bad, p, c, false, r));
  }
}

TEST_CASE("layer gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(gradcheck::masked_attention(seed) < 1e-4);
    CHECK(gradcheck::cmt_layer(seed) < 1e-4);
    CHECK(gradcheck::network(seed) < 1e-4);
  }
}

TEST_CASE("ill-conditioned layernorm instances converge at second order") {
  // Without the variance floor some draws miss the tolerance at step 1e-4;
  // the discrepancy must then shrink ~100x per 10x smaller step, which
  // identifies truncation error rather than a wrong gradient.
  int seen = 0;
  for (std::uint64_t seed = 0; seed < 200 && seen < 3; ++seed) {
    const double coarse = gradcheck::cmt_layer(seed, 1e-4, false);
    if (coarse < 1e-4) continue;
    ++seen;
    CAPTURE(seed);
    const double fine = gradcheck::cmt_layer(seed, 1e-5, false);
    CHECK(fine < coarse / 50.0);
    CHECK(gradcheck::cmt_layer(seed, 1e-6, false) < 1e-4);
  }
  CHECK(seen > 0);
}

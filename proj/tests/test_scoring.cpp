#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catchad/scoring.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <cstring>

using namespace catchad;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ModelConfig small_config() {
  ModelConfig c;
  c.channels = 2;
  c.window = 16;
  c.patch_size = 4;
  c.patch_stride = 4;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 1;
  c.d_ff = 8;
  return c;
}

}  // namespace

TEST_CASE("time_score") {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(3, 6, rng);
  CHECK(time_score(x, x).isZero());
  Matrix a(1, 2), b = Matrix::Zero(1, 2);
  a << 1, 2;
  CHECK(time_score(a, b) == vec({1, 4}));
  Matrix c(2, 2);
  c << 1, 0, 0, 2;
  CHECK(time_score(c, Matrix::Zero(2, 2)) == vec({0.5, 2.0}));
  CHECK_THROWS(time_score(c, Matrix::Zero(2, 3)));
}

TEST_CASE("coverage counts") {
  CHECK(coverage_count(0, 5, 3) == 1);
  CHECK(coverage_count(1, 5, 3) == 2);
  CHECK(coverage_count(2, 5, 3) == 3);
  CHECK(coverage_count(4, 5, 3) == 1);
  for (Eigen::Index t = 1; t <= 16; ++t)
    for (Eigen::Index p = 1; p <= t; ++p)
      for (Eigen::Index i = 0; i < t; ++i) {
        Eigen::Index brute = 0;
        for (Eigen::Index s = 0; s + p <= t; ++s) brute += (i >= s && i < s + p);
        CHECK(coverage_count(i, t, p) == brute);
        CHECK(brute >= 1);
      }
}

TEST_CASE("frequency_point_score against the brute-force oracle") {
  Rng rng(7);
  const Matrix x = oracle::random_matrix(3, 9, rng);
  CHECK(frequency_point_score(x, x, 4).isZero());
  for (Eigen::Index t = 1; t <= 16; ++t)
    for (Eigen::Index p = 1; p <= t; ++p) {
      const Matrix a = oracle::random_matrix(2, t, rng), b = oracle::random_matrix(2, t, rng);
      const Vector got = frequency_point_score(a, b, p);
      const Vector want = oracle::brute_frequency_point_score(a, b, p);
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
    }
  CHECK_THROWS(frequency_point_score(x, x, 10));
  CHECK_THROWS(frequency_point_score(x, x, 0));
  CHECK_THROWS(frequency_point_score(x, x, 3, 4));
}

TEST_CASE("frequency_point_score padding branch for stride > 1") {
  Rng rng(9);
  const Matrix a = oracle::random_matrix(2, 11, rng), b = oracle::random_matrix(2, 11, rng);
  // T=11, p=4, s=3: patches at 0, 3, 6 cover [0, 10); the last point is a
  // one-sample tail scored on its own
  const Vector got = frequency_point_score(a, b, 4, 3);
  const Matrix r = b - a;
  CHECK(std::abs(got(10) - r.col(10).cwiseAbs().mean()) < 1e-12);

  auto patch_err = [&](Eigen::Index s, Eigen::Index c) {
    const auto [re, im] = oracle::naive_dft(r.block(c, s, 1, 4));
    return (re.cwiseAbs().sum() + im.cwiseAbs().sum()) / 3.0;
  };
  // t = 3 is covered by the patches starting at 0 and 3
  double want = 0.0;
  for (Eigen::Index c = 0; c < 2; ++c) want += 0.5 * (patch_err(0, c) + patch_err(3, c)) / 2.0;
  CHECK(std::abs(got(3) - want) < 1e-9);
}

TEST_CASE("combine_scores") {
  CHECK(combine_scores(vec({1, 2}), vec({10, 10}), 0.05) == vec({1.5, 2.5}));
  CHECK(combine_scores(vec({1, 2}), vec({10, 10}), 0.0) == vec({1, 2}));
  CHECK(combine_scores(vec({0, 0}), vec({3, 4}), 0.5) == vec({1.5, 2}));
  CHECK_THROWS(combine_scores(vec({1}), vec({1, 2}), 0.1));
  Rng rng(3);
  const Vector t = oracle::random_matrix(20, 1, rng).col(0);
  const Vector f = oracle::random_matrix(20, 1, rng).col(0).cwiseAbs();
  CHECK((combine_scores(t, f, 0.2).array() >= combine_scores(t, f, 0.1).array()).all());
}

TEST_CASE("threshold") {
  const Vector s = vec({1, 2, 3, 4});
  CHECK(threshold_value(s, 0.25) == 3.0);
  CHECK(apply_threshold(s, 0.25) == Labels{0, 0, 0, 1});
  CHECK(threshold_value(s, 0.5) == 2.0);
  CHECK(apply_threshold(s, 0.5) == Labels{0, 0, 1, 1});
  CHECK(apply_threshold(Vector::Constant(10, 0.3), 0.2) == Labels(10, 0));
  CHECK(apply_threshold(s, 1e-6) == Labels(4, 0));
  CHECK_THROWS(apply_threshold(s, 0.0));
  CHECK_THROWS(apply_threshold(s, 1.0));
  CHECK_THROWS(threshold_value(Vector(), 0.1));
}

TEST_CASE("score_series stitching") {
  const auto c = small_config();
  Rng rng(4);
  const auto params = init_params(c, rng);
  ScoreConfig sc;
  sc.inference_patch_size = 4;

  auto series_of = [&](Eigen::Index len) {
    LabeledSeries s;
    s.values = oracle::random_matrix(2, len, rng);
    return s;
  };
  auto window_scores = [&](const LabeledSeries& s, Eigen::Index origin) {
    TimeWindow w;
    w.values = s.values.middleCols(origin, 16);
    w.norm_stats.assign(2, NormStats{});
    const Matrix x = instance_normalize(w).values;
    Rng r(0);
    TimeWindow nw;
    nw.values = x;
    const auto out = forward(nw, params, c, false, r);
    return std::pair<Vector, Vector>{time_score(x, out.recon_time), frequency_point_score(x, out.recon_time, 4)};
  };

  const auto one = series_of(16);
  const auto s1 = score_series(params, one, c, sc);
  CHECK(s1.size() == 16);
  CHECK((s1.time_score - window_scores(one, 0).first).cwiseAbs().maxCoeff() < 1e-12);

  const auto two = series_of(32);
  const auto s2 = score_series(params, two, c, sc);
  CHECK(s2.size() == 32);
  CHECK((s2.time_score.tail(16) - window_scores(two, 16).first).cwiseAbs().maxCoeff() < 1e-12);

  const auto mid = series_of(24);
  const auto s3 = score_series(params, mid, c, sc);
  REQUIRE(s3.size() == 24);
  const auto [t0, f0] = window_scores(mid, 0);
  const auto [t1, f1] = window_scores(mid, 8);
  CHECK((s3.time_score.head(8) - t0.head(8)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s3.time_score.tail(16) - t1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s3.freq_score.tail(16) - f1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s3.final_score - (s3.time_score + sc.score_lambda * s3.freq_score)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s3.predictions);
  CHECK(s3.predictions->size() == 24);

  sc.mode = ScoreMode::Window;
  const auto sw = score_series(params, two, c, sc);
  CHECK(sw.freq_score(0) == sw.freq_score(15));
  CHECK(sw.freq_score(16) == sw.freq_score(31));
}

TEST_CASE("score_series errors") {
  const auto c = small_config();
  Rng rng(4);
  const auto params = init_params(c, rng);
  LabeledSeries s;
  s.values = oracle::random_matrix(3, 40, rng);
  try {
    score_series(params, s, c, ScoreConfig{});
    FAIL("expected a channel error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3 channels") != std::string::npos);
    CHECK(msg.find("N=2") != std::string::npos);
  }
  s.values = oracle::random_matrix(2, 10, rng);
  CHECK_THROWS(score_series(params, s, c, ScoreConfig{}));
  ScoreConfig bad;
  bad.inference_patch_size = 17;
  s.values = oracle::random_matrix(2, 40, rng);
  CHECK_THROWS(score_series(params, s, c, bad));
  CHECK(parse_score_mode("window") == ScoreMode::Window);
  CHECK_THROWS(parse_score_mode("patch"));
}

TEST_CASE("score CSV round trip and errors") {
  TempDir dir;
  Rng rng(2);
  ScoreSeries s;
  s.time_score = oracle::random_matrix(5, 1, rng).col(0);
  s.freq_score = oracle::random_matrix(5, 1, rng).col(0);
  s.final_score = combine_scores(s.time_score, s.freq_score, 0.05);
  s.predictions = Labels{0, 1, 0, 0, 1};
  s.labels = Labels{0, 1, 1, 0, 0};
  write_score_csv(dir.path / "s.csv", s);
  const auto back = read_score_csv(dir.path / "s.csv");
  CHECK(std::memcmp(back.final_score.data(), s.final_score.data(), 5 * sizeof(double)) == 0);
  CHECK(std::memcmp(back.freq_score.data(), s.freq_score.data(), 5 * sizeof(double)) == 0);
  CHECK(*back.predictions == *s.predictions);
  CHECK(*back.labels == *s.labels);

  const auto bad = dir.write("bad.csv", "index,time_score,freq_score,final_score,prediction\n0,1,2,3,0\n1,1,x,3,0\n");
  try {
    read_score_csv(bad);
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS(read_score_csv(dir.write("empty.csv", "")));
  CHECK_THROWS(read_score_csv(dir.write("short.csv", "index,time_score\n0,1\n")));
}

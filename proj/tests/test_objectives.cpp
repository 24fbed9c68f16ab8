#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catchad/objectives.hpp"
#include "support/gradchecks.hpp"
#include "support/oracles.hpp"

using namespace catchad;

TEST_CASE("rec_loss_time") {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(3, 7, rng);
  CHECK(rec_loss_time(x, x) == 0.0);
  CHECK(rec_loss_time(Matrix::Constant(2, 3, 2.0), Matrix::Zero(2, 3)) == 4.0);
  const Matrix y = oracle::random_matrix(3, 7, rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += (x.data()[i] - y.data()[i]) * (x.data()[i] - y.data()[i]);
  CHECK(std::abs(rec_loss_time(x, y) - acc / 21.0) < 1e-12);
  CHECK(rec_loss_time(3.0 * x, 3.0 * y) == doctest::Approx(9.0 * rec_loss_time(x, y)).epsilon(1e-12));
  CHECK_THROWS(rec_loss_time(x, Matrix::Zero(3, 6)));
}

TEST_CASE("rec_loss_freq") {
  Rng rng(2);
  const Matrix a = oracle::random_matrix(2, 5, rng), b = oracle::random_matrix(2, 5, rng);
  const Matrix c = oracle::random_matrix(2, 5, rng), d = oracle::random_matrix(2, 5, rng);
  CHECK(rec_loss_freq(a, b, a, b) == 0.0);
  CHECK(rec_loss_freq(a + Matrix::Ones(2, 5), b, a, b) == doctest::Approx(1.0).epsilon(1e-14));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i) acc += std::abs(a.data()[i] - c.data()[i]) / 10.0;
  for (Eigen::Index i = 0; i < 10; ++i) acc += std::abs(b.data()[i] - d.data()[i]) / 10.0;
  CHECK(std::abs(rec_loss_freq(a, b, c, d) - acc) < 1e-12);
  CHECK(rec_loss_freq(2.0 * a, 2.0 * b, 2.0 * c, 2.0 * d) == doctest::Approx(2.0 * acc).epsilon(1e-12));
  CHECK_THROWS(rec_loss_freq(a, b, c, Matrix::Zero(2, 4)));
}

TEST_CASE("clustering_loss anchors") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix t = oracle::random_matrix(4, 4, rng, 3.0);
    CHECK(clustering_loss(t, t, Matrix::Ones(4, 4), 0.3 + trial * 0.1) == 0.0);
  }
  Matrix masked = Matrix::Constant(2, 2, layers::kMaskedScore);
  masked.diagonal().setZero();
  CHECK(clustering_loss(Matrix::Zero(2, 2), masked, Matrix::Identity(2, 2), 1.0) ==
        doctest::Approx(0.693147180559945).epsilon(1e-12));
}

TEST_CASE("clustering_loss is non-negative on binary masks") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const Matrix t = oracle::random_matrix(n, n, rng, 2.0);
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = (i == j || rng() % 2) ? 1.0 : 0.0;
    Matrix s = t;
    for (Eigen::Index i = 0; i < m.size(); ++i)
      if (m.data()[i] == 0.0) s.data()[i] = layers::kMaskedScore;
    CHECK(clustering_loss(t, s, m, 1.0) >= 0.0);
  }
  CHECK_THROWS(clustering_loss(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2), 1.0));
  CHECK_THROWS(clustering_loss(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Ones(2, 2), 0.0));
}

TEST_CASE("regular_loss") {
  CHECK(regular_loss(Matrix::Identity(5, 5)) == 0.0);
  CHECK(regular_loss(Matrix::Ones(2, 2)) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(regular_loss(Matrix::Ones(3, 3)) == doctest::Approx(0.81650).epsilon(1e-5));
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 6;
    Matrix m = Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && rng() % 2) m(i, j) = 1.0;
    const double v = regular_loss(m);
    CHECK(v >= 0.0);
    CHECK(v <= std::sqrt(double(n * (n - 1))) / n + 1e-15);
    CHECK((v == 0.0) == (m == Matrix::Identity(n, n)));
  }
}

TEST_CASE("total_loss") {
  LossWeights zero{0, 0, 0, 0, 1};
  CHECK(total_loss({0.2, 0.3, 0.4, 0.5}, zero) == 0.0);
  CHECK(total_loss({0.5, 9, 9, 9}, LossWeights{1, 0, 0, 0, 1}) == 0.5);
  CHECK(total_loss({0.2, 0.3, 0.4, 0.5}, LossWeights{1, 1, 0.1, 0.1, 1}) == doctest::Approx(0.59).epsilon(1e-14));
  CHECK_THROWS_AS(total_loss({std::nan(""), 0, 0, 0}, LossWeights{}), std::domain_error);
  CHECK_THROWS_AS(total_loss({0, 0, INFINITY, 0}, LossWeights{}), std::domain_error);
}

TEST_CASE("loss gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(gradcheck::rec_time(seed) < 1e-4);
    CHECK(gradcheck::rec_freq(seed) < 1e-4);
    CHECK(gradcheck::clustering(seed) < 1e-4);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catchad/metrics.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace catchad;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Labels random_labels(std::size_t n, double p, Rng& rng) {
  std::bernoulli_distribution b(p);
  Labels l(n);
  for (auto& v : l) v = b(rng);
  return l;
}

Labels segment(std::size_t n, std::size_t lo, std::size_t hi) {
  Labels l(n, 0);
  for (std::size_t i = lo; i < hi && i < n; ++i) l[i] = 1;
  return l;
}

/// Precision side by sampling predicted points of one zone.
double sampled_affiliation_precision(double a, double b, const std::vector<std::pair<double, double>>& preds,
                                     double e1, double e2, int samples = 20000) {
  double width = 0.0;
  for (const auto& [lo, hi] : preds) width += hi - lo;
  double total = 0.0;
  for (const auto& [lo, hi] : preds) {
    const int k = std::max(1, static_cast<int>(samples * (hi - lo) / width));
    double part = 0.0;
    for (int i = 0; i < k; ++i) {
      const double x = lo + (hi - lo) * (i + 0.5) / k;
      const double d = std::max({0.0, a - x, x - b});
      // fraction of the zone whose distance to [a, b) is at least d
      const double far = std::max(0.0, a - d - e1) + std::max(0.0, e2 - b - d);
      part += d == 0.0 ? 1.0 : far / (e2 - e1);
    }
    total += part / k * (hi - lo);
  }
  return total / width;
}

}  // namespace

TEST_CASE("events_from_labels") {
  CHECK(events_from_labels({0, 1, 1, 0, 1}) == EventList{{1, 3}, {4, 5}});
  CHECK(events_from_labels({0, 0}).empty());
  CHECK(events_from_labels({1, 1}) == EventList{{0, 2}});
}

TEST_CASE("confusion metrics") {
  const auto m = confusion_metrics({1, 1, 0, 0}, {1, 0, 1, 0});
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);
  const auto z = confusion_metrics({0, 0, 0}, {0, 1, 0});
  CHECK(z.precision == 0.0);
  CHECK(z.f1 == 0.0);
  CHECK(z.accuracy == doctest::Approx(2.0 / 3.0));
  const auto p = confusion_metrics({1, 0, 1}, {1, 0, 1});
  CHECK(p.f1 == 1.0);
  CHECK_THROWS(confusion_metrics({1, 0}, {1}));
  CHECK_THROWS(confusion_metrics({}, {}));
}

TEST_CASE("auc_roc examples") {
  CHECK(auc_roc(vec({0.1, 0.4, 0.35, 0.8}), {0, 0, 1, 1}) == 0.75);
  CHECK(auc_roc(vec({1, 1, 1, 1}), {0, 1, 0, 1}) == 0.5);
  CHECK(auc_roc(vec({1, 2, 3, 4}), {0, 0, 1, 1}) == 1.0);
  CHECK_THROWS(auc_roc(vec({1, 2}), {1, 1}));
  CHECK_THROWS(auc_roc(vec({1, 2}), {0, 0}));
  CHECK_THROWS(auc_roc(vec({1, 2}), {0}));
}

TEST_CASE("auc_roc matches the all-pairs count") {
  Rng rng(17);
  std::uniform_int_distribution<int> len(2, 200);
  for (int k = 0; k < 300; ++k) {
    const auto n = static_cast<std::size_t>(len(rng));
    Labels y = random_labels(n, 0.3, rng);
    y[0] = 1;
    y[1] = 0;
    Vector s = oracle::random_matrix(static_cast<Eigen::Index>(n), 1, rng).col(0);
    // coarse rounding produces ties
    if (k % 2) s = (s * 3).array().round();
    CHECK(std::abs(auc_roc(s, y) - oracle::brute_auc(s, y)) <= 1e-12);
    // invariant to strictly increasing transforms, and flips under negation
    const Vector e = s.unaryExpr([](double v) { return std::exp(v); });
    CHECK(std::abs(auc_roc(e, y) - auc_roc(s, y)) <= 1e-12);
    CHECK(std::abs(auc_roc(-s, y) - (1.0 - auc_roc(s, y))) <= 1e-12);
  }
}

TEST_CASE("auc_pr") {
  Rng rng(23);
  CHECK(auc_pr(vec({2, 2, 2, 2}), {0, 1, 0, 0}) == 0.25);
  CHECK(auc_pr(vec({1, 2, 3, 4}), {0, 0, 1, 1}) == 1.0);
  CHECK_THROWS(auc_pr(vec({1, 2}), {0, 0}));
  for (int k = 0; k < 300; ++k) {
    const auto n = static_cast<std::size_t>(2 + k % 150);
    Labels y = random_labels(n, 0.2, rng);
    y[0] = 1;
    Vector s = oracle::random_matrix(static_cast<Eigen::Index>(n), 1, rng).col(0);
    if (k % 3 == 0) s = (s * 2).array().round();
    const double v = auc_pr(s, y);
    CHECK(std::abs(v - oracle::brute_average_precision(s, y)) <= 1e-12);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("affiliation trivial cases") {
  const Labels y = segment(100, 40, 50);
  const auto perfect = affiliation_prf(y, y);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto empty = affiliation_prf(Labels(100, 0), y);
  CHECK(empty.precision == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK_THROWS(affiliation_prf(y, Labels(100, 0)));

  Labels two = segment(100, 10, 20);
  for (std::size_t i = 70; i < 75; ++i) two[i] = 1;
  const auto both = affiliation_prf(two, two);
  CHECK(both.f1 == 1.0);
  // predicting only the first event leaves the second zone's recall low
  const auto half = affiliation_prf(segment(100, 10, 20), two);
  CHECK(half.precision == 1.0);
  CHECK(half.recall < 0.8);
}

TEST_CASE("affiliation recall decreases as the prediction moves away") {
  const std::size_t n = 200;
  const Labels y = segment(n, 90, 100);
  double prev_r = 2.0, prev_p = 2.0;
  for (std::size_t k = 0; k <= 80; ++k) {
    const auto m = affiliation_prf(segment(n, 90 + k, 100 + k), y);
    CHECK(m.recall <= prev_r + 1e-12);
    CHECK(m.precision <= prev_p + 1e-12);
    prev_r = m.recall;
    prev_p = m.precision;
  }
  CHECK(prev_r < 0.7);
}

TEST_CASE("affiliation matches sampled distance integrals") {
  Rng rng(31);
  std::uniform_int_distribution<int> pos(0, 119);
  for (int k = 0; k < 60; ++k) {
    const std::size_t n = 120;
    const auto a = static_cast<std::size_t>(pos(rng) % 100);
    const Labels y = segment(n, a, a + 1 + static_cast<std::size_t>(pos(rng) % 15));
    Labels pred(n, 0);
    for (int j = 0; j < 3; ++j) {
      const auto s = static_cast<std::size_t>(pos(rng));
      for (std::size_t i = s; i < std::min(n, s + 1 + static_cast<std::size_t>(pos(rng) % 8)); ++i) pred[i] = 1;
    }
    const auto ev = events_from_labels(y).front();
    std::vector<std::pair<double, double>> pieces;
    for (const auto& e : events_from_labels(pred))
      pieces.emplace_back(static_cast<double>(e.start), static_cast<double>(e.end));
    const auto m = affiliation_prf(pred, y);
    const double want_r = oracle::sampled_affiliation_recall(static_cast<double>(ev.start), static_cast<double>(ev.end),
                                                             pieces, 0.0, static_cast<double>(n));
    const double want_p = sampled_affiliation_precision(static_cast<double>(ev.start), static_cast<double>(ev.end),
                                                        pieces, 0.0, static_cast<double>(n));
    CHECK(m.recall == doctest::Approx(want_r).epsilon(1e-3));
    CHECK(m.precision == doctest::Approx(want_p).epsilon(1e-3));
  }
}

TEST_CASE("affiliation stays in the unit cube") {
  Rng rng(41);
  for (int k = 0; k < 500; ++k) {
    const auto n = static_cast<std::size_t>(5 + k % 120);
    Labels y = random_labels(n, 0.1, rng);
    y[n / 2] = 1;
    const Labels p = random_labels(n, 0.15 * (k % 4), rng);
    const auto m = affiliation_prf(p, y);
    for (double v : {m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("report output") {
  const auto full = evaluate_metrics(vec({0.1, 0.9, 0.2, 0.8}), {0, 1, 0, 1}, {0, 1, 0, 1});
  CHECK(full.errors.empty());
  CHECK(to_key_value(full) ==
        "accuracy=1\nprecision=1\nrecall=1\nf1=1\nauc_roc=1\nauc_pr=1\naff_p=1\naff_r=1\naff_f=1\n");
  CHECK(csv_header() == "accuracy,precision,recall,f1,auc_roc,auc_pr,aff_p,aff_r,aff_f");
  CHECK(to_csv_row(full) == "1,1,1,1,1,1,1,1,1");

  const auto partial = evaluate_metrics(vec({0.1, 0.9}), {0, 1}, {0, 0});
  CHECK(partial.errors.size() == 3);
  CHECK(!partial.auc_roc);
  CHECK(to_csv_row(partial) == "0.5,0,0,0,nan,nan,nan,nan,nan");
}

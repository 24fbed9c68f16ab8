#include "catchad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace catchad {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("length mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

std::size_t count_positive(const Labels& labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

double harmonic(double p, double r) { return (p > 0.0 && r > 0.0) ? 2.0 * p * r / (p + r) : 0.0; }

struct Interval {
  double lo, hi;
};

/// Integral of f over [lo, hi] where f is linear between consecutive
/// breakpoints; evaluated at midpoints so jumps at breakpoints are harmless.
double integrate_piecewise(const std::function<double(double)>& f, double lo, double hi,
                           std::vector<double> points) {
  points.push_back(lo);
  points.push_back(hi);
  std::vector<double> inside;
  for (double p : points)
    if (p >= lo && p <= hi) inside.push_back(p);
  std::sort(inside.begin(), inside.end());
  inside.erase(std::unique(inside.begin(), inside.end()), inside.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < inside.size(); ++i) {
    const double a = inside[i], b = inside[i + 1];
    total += (b - a) * f(0.5 * (a + b));
  }
  return total;
}

double distance_to(double x, const Interval& iv) { return std::max({0.0, iv.lo - x, x - iv.hi}); }

/// Mean survival probability of the predicted points in `pieces`.
double precision_probability(const std::vector<Interval>& pieces, const Interval& event,
                             const Interval& zone) {
  const double a = event.lo, b = event.hi, e1 = zone.lo, e2 = zone.hi;
  const double zone_len = e2 - e1;
  auto survival = [&](double x) {
    if (x >= a && x <= b) return 1.0;
    const double d = distance_to(x, event);
    return (std::max(0.0, a - e1 - d) + std::max(0.0, e2 - b - d)) / zone_len;
  };
  double area = 0.0, length = 0.0;
  for (const auto& p : pieces) {
    area += integrate_piecewise(survival, p.lo, p.hi, {a, b, e1, e2, a + b - e2, a + b - e1});
    length += p.hi - p.lo;
  }
  return area / length;
}

/// Mean survival probability over the event of the distance to the predictions.
double recall_probability(const std::vector<Interval>& pieces, const Interval& event,
                          const Interval& zone) {
  if (pieces.empty()) return 0.0;
  const double e1 = zone.lo, e2 = zone.hi;
  const double zone_len = e2 - e1;
  auto dist = [&](double y) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : pieces) d = std::min(d, distance_to(y, p));
    return d;
  };
  std::vector<double> points;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    points.push_back(pieces[i].lo);
    points.push_back(pieces[i].hi);
    if (i + 1 < pieces.size()) points.push_back(0.5 * (pieces[i].hi + pieces[i + 1].lo));
  }
  // distance is linear between those points; add the zeros of the clamped terms
  std::vector<double> structural = points;
  structural.push_back(event.lo);
  structural.push_back(event.hi);
  std::sort(structural.begin(), structural.end());
  auto left_room = [&](double y) { return y - dist(y) - e1; };
  auto right_room = [&](double y) { return e2 - y - dist(y); };
  for (std::size_t i = 0; i + 1 < structural.size(); ++i) {
    const double s0 = structural[i], s1 = structural[i + 1];
    if (!(s1 > s0)) continue;
    for (const auto& g : {std::function<double(double)>(left_room), std::function<double(double)>(right_room)}) {
      const double g0 = g(s0), g1 = g(s1);
      if (g0 * g1 < 0.0) points.push_back(s0 + (s1 - s0) * g0 / (g0 - g1));
    }
  }
  auto survival = [&](double y) {
    const double d = dist(y);
    if (d == 0.0) return 1.0;
    return (std::max(0.0, y - d - e1) + std::max(0.0, e2 - y - d)) / zone_len;
  };
  return integrate_piecewise(survival, event.lo, event.hi, points) / (event.hi - event.lo);
}

}  // namespace

EventList events_from_labels(const Labels& labels) {
  EventList events;
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (Eigen::Index i = 0; i < n;) {
    if (labels[static_cast<std::size_t>(i)]) {
      Eigen::Index j = i;
      while (j < n && labels[static_cast<std::size_t>(j)]) ++j;
      events.push_back({i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return events;
}

ConfusionMetrics confusion_metrics(const Labels& pred, const Labels& labels) {
  check_lengths(pred.size(), labels.size());
  if (labels.empty()) throw std::invalid_argument("confusion_metrics: empty input");
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, y = labels[i] != 0;
    if (p && y) ++tp;
    else if (p && !y) ++fp;
    else if (!p && y) ++fn;
    else ++tn;
  }
  ConfusionMetrics m;
  m.accuracy = (tp + tn) / static_cast<double>(pred.size());
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

double auc_roc(const Vector& scores, const Labels& labels) {
  check_lengths(static_cast<std::size_t>(scores.size()), labels.size());
  const std::size_t n = labels.size();
  const std::size_t pos = count_positive(labels);
  if (pos == 0 || pos == n) throw std::invalid_argument("auc_roc needs both positive and negative labels");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b)); });
  // sum of average ranks of positives
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double v = scores(static_cast<Eigen::Index>(order[i]));
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) == v) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double q = static_cast<double>(n - pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double auc_pr(const Vector& scores, const Labels& labels) {
  check_lengths(static_cast<std::size_t>(scores.size()), labels.size());
  const std::size_t n = labels.size();
  const std::size_t pos = count_positive(labels);
  if (pos == 0) throw std::invalid_argument("auc_pr needs at least one positive label");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b)); });
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double v = scores(static_cast<Eigen::Index>(order[i]));
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) == v) {
      (labels[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / static_cast<double>(pos);
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return area;
}

AffiliationMetrics affiliation_prf(const Labels& pred, const Labels& labels) {
  check_lengths(pred.size(), labels.size());
  const auto truth = events_from_labels(labels);
  if (truth.empty()) throw std::invalid_argument("affiliation metrics need at least one ground-truth event");
  const auto predicted = events_from_labels(pred);
  const double length = static_cast<double>(labels.size());

  std::vector<Interval> zones;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double lo = j == 0 ? 0.0 : 0.5 * static_cast<double>(truth[j - 1].end + truth[j].start);
    const double hi =
        j + 1 == truth.size() ? length : 0.5 * static_cast<double>(truth[j].end + truth[j + 1].start);
    zones.push_back({lo, hi});
  }

  double precision_sum = 0.0, recall_sum = 0.0;
  std::size_t precision_zones = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const Interval event{static_cast<double>(truth[j].start), static_cast<double>(truth[j].end)};
    std::vector<Interval> pieces;
    for (const auto& e : predicted) {
      const double lo = std::max(zones[j].lo, static_cast<double>(e.start));
      const double hi = std::min(zones[j].hi, static_cast<double>(e.end));
      if (hi > lo) pieces.push_back({lo, hi});
    }
    if (!pieces.empty()) {
      precision_sum += precision_probability(pieces, event, zones[j]);
      ++precision_zones;
    }
    recall_sum += recall_probability(pieces, event, zones[j]);
  }
  AffiliationMetrics m;
  m.precision = precision_zones ? precision_sum / static_cast<double>(precision_zones) : 0.0;
  m.recall = recall_sum / static_cast<double>(truth.size());
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

MetricReport evaluate_metrics(const Vector& scores, const Labels& predictions, const Labels& labels) {
  MetricReport r;
  r.confusion = confusion_metrics(predictions, labels);
  try {
    r.auc_roc = auc_roc(scores, labels);
  } catch (const std::invalid_argument& e) {
    r.errors.push_back(std::string("auc_roc: ") + e.what());
  }
  try {
    r.auc_pr = auc_pr(scores, labels);
  } catch (const std::invalid_argument& e) {
    r.errors.push_back(std::string("auc_pr: ") + e.what());
  }
  try {
    r.affiliation = affiliation_prf(predictions, labels);
  } catch (const std::invalid_argument& e) {
    r.errors.push_back(std::string("affiliation: ") + e.what());
  }
  return r;
}

namespace {

std::vector<std::pair<std::string, std::optional<double>>> fields(const MetricReport& r) {
  auto aff = [&](double AffiliationMetrics::*m) -> std::optional<double> {
    if (!r.affiliation) return std::nullopt;
    return (*r.affiliation).*m;
  };
  return {{"accuracy", r.confusion.accuracy},
          {"precision", r.confusion.precision},
          {"recall", r.confusion.recall},
          {"f1", r.confusion.f1},
          {"auc_roc", r.auc_roc},
          {"auc_pr", r.auc_pr},
          {"aff_p", aff(&AffiliationMetrics::precision)},
          {"aff_r", aff(&AffiliationMetrics::recall)},
          {"aff_f", aff(&AffiliationMetrics::f1)}};
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", *v);
  return buf;
}

}  // namespace

std::string to_key_value(const MetricReport& report) {
  std::string out;
  for (const auto& [k, v] : fields(report)) out += k + "=" + fmt(v) + "\n";
  return out;
}

std::string csv_header() {
  std::string out;
  for (const auto& [k, v] : fields(MetricReport{})) out += (out.empty() ? "" : ",") + k;
  return out;
}

std::string to_csv_row(const MetricReport& report) {
  std::string out;
  bool first = true;
  for (const auto& [k, v] : fields(report)) {
    out += (first ? "" : ",") + fmt(v);
    first = false;
  }
  return out;
}

}  // namespace catchad

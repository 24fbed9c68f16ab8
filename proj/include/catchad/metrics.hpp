#pragma once

#include "catchad/seriesio.hpp"
#include "catchad/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace catchad {

/// Half-open index range [start, end).
struct Event {
  Eigen::Index start = 0;
  Eigen::Index end = 0;
  bool operator==(const Event&) const = default;
};

using EventList = std::vector<Event>;

/// Maximal runs of ones, in order.
EventList events_from_labels(const Labels& labels);

struct ConfusionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

ConfusionMetrics confusion_metrics(const Labels& predictions, const Labels& labels);

/// Mann-Whitney form: P(score_pos > score_neg) + 0.5 P(tie).
double auc_roc(const Vector& scores, const Labels& labels);

/// Step-wise area under precision-recall: sum over distinct thresholds of
/// (recall gain) * precision.
double auc_pr(const Vector& scores, const Labels& labels);

struct AffiliationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Event-wise affiliation precision/recall. The timeline [0, length) is split
/// into one zone per ground-truth event (cuts at midpoints between events).
/// In each zone the mean distance from predicted points to the event
/// (precision) and from event points to the predictions (recall) is turned
/// into a survival probability against a uniformly random point of the zone.
/// Precision averages over zones that contain predictions, recall over all
/// zones. An empty prediction gives precision 0.
AffiliationMetrics affiliation_prf(const Labels& predictions, const Labels& labels);

struct MetricReport {
  ConfusionMetrics confusion;
  std::optional<double> auc_roc;
  std::optional<double> auc_pr;
  std::optional<AffiliationMetrics> affiliation;
  std::vector<std::string> errors;  // metrics that could not be computed, and why
};

/// Computes every metric that the labels permit; failures land in `errors`.
MetricReport evaluate_metrics(const Vector& scores, const Labels& predictions, const Labels& labels);

/// Flat `key=value` lines; unavailable metrics are written as `nan`.
std::string to_key_value(const MetricReport& report);
std::string csv_header();
std::string to_csv_row(const MetricReport& report);

}  // namespace catchad

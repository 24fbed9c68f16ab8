#pragma once

#include "catchad/model.hpp"
#include "catchad/seriesio.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace catchad {

enum class ScoreMode {
  Point,   // per-timestamp average over covering stride-1 patches
  Window,  // one frequency error per window, broadcast to all its points
};

ScoreMode parse_score_mode(const std::string& text);
std::string to_string(ScoreMode mode);

struct ScoreConfig {
  Eigen::Index inference_patch_size = 16;  // time-domain patch length
  Eigen::Index inference_patch_stride = 1;
  double score_lambda = 0.05;
  double threshold_ratio = 0.05;
  ScoreMode mode = ScoreMode::Point;

  void validate(Eigen::Index window) const;
};

struct ScoreSeries {
  Vector time_score;
  Vector freq_score;
  Vector final_score;
  std::optional<Labels> predictions;
  std::optional<Labels> labels;

  Eigen::Index size() const { return final_score.size(); }
};

/// Mean over channels of the squared residual at each timestamp.
Vector time_score(const Matrix& target, const Matrix& recon);

/// Per-channel frequency discrepancy of one block: mean |dRe| + mean |dIm|
/// over the one-sided spectrum of the residual.
Vector spectral_error(const Matrix& target, const Matrix& recon);

/// Point-granularity frequency score: every timestamp receives the mean error
/// of all patches covering it, then the mean over channels. Timestamps past
/// the last full patch (only possible for stride > 1) share one error
/// computed over that remainder.
Vector frequency_point_score(const Matrix& target, const Matrix& recon, Eigen::Index patch,
                             Eigen::Index stride = 1);

/// Window-granularity variant: one error for the whole window.
Vector frequency_window_score(const Matrix& target, const Matrix& recon);

/// Number of stride-1 patches of length `patch` covering timestamp t.
Eigen::Index coverage_count(Eigen::Index t, Eigen::Index length, Eigen::Index patch);

Vector combine_scores(const Vector& time, const Vector& freq, double score_lambda);

/// Nearest-rank (1 - ratio) quantile of `scores`.
double threshold_value(const Vector& scores, double ratio);

/// 1 where score > nearest-rank (1 - ratio) quantile.
Labels apply_threshold(const Vector& scores, double ratio);

/// Scores a whole series with windows at stride T (tail window anchored at
/// length - T, later windows win on overlap).
ScoreSeries score_series(const ModelParams& params, const LabeledSeries& series,
                         const ModelConfig& model_config, const ScoreConfig& score_config);

/// Columns: index, time_score, freq_score, final_score, prediction[, label].
void write_score_csv(const std::filesystem::path& path, const ScoreSeries& scores);
ScoreSeries read_score_csv(const std::filesystem::path& path);

}  // namespace catchad

#include "catchad/scoring.hpp"

#include "catchad/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace catchad {

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "point") return ScoreMode::Point;
  if (text == "window") return ScoreMode::Window;
  throw std::invalid_argument("unknown score mode '" + text + "' (expected point or window)");
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::Point ? "point" : "window"; }

void ScoreConfig::validate(Eigen::Index window) const {
  if (inference_patch_size < 1 || inference_patch_size > window) {
    throw std::invalid_argument("inference_patch_size must be in [1, " + std::to_string(window) +
                                "]");
  }
  if (inference_patch_stride < 1 || inference_patch_stride > inference_patch_size)
    throw std::invalid_argument("inference_patch_stride must be in [1, inference_patch_size]");
  if (!(score_lambda >= 0.0)) throw std::invalid_argument("score_lambda must be >= 0");
  if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0))
    throw std::invalid_argument("threshold_ratio must be in (0, 1)");
}

Vector time_score(const Matrix& target, const Matrix& recon) {
  if (target.rows() != recon.rows() || target.cols() != recon.cols())
    throw std::invalid_argument("time_score: shape mismatch");
  return (target - recon).array().square().colwise().mean().transpose();
}

namespace {

/// Spectral error of residual columns [start, start + len) for every channel.
Vector residual_spectral_error(const Matrix& residual, Eigen::Index start, Eigen::Index len,
                               const DftPlan* plan) {
  if (len == 1) return residual.col(start).cwiseAbs();
  Matrix re, im;
  plan->forward(residual.middleCols(start, len), re, im);
  const double bins = static_cast<double>(re.cols());
  return (re.cwiseAbs().rowwise().sum() + im.cwiseAbs().rowwise().sum()) / bins;
}

std::unique_ptr<DftPlan> plan_for(Eigen::Index len) {
  return len >= 2 ? std::make_unique<DftPlan>(len) : nullptr;
}

}  // namespace

Vector spectral_error(const Matrix& target, const Matrix& recon) {
  if (target.rows() != recon.rows() || target.cols() != recon.cols())
    throw std::invalid_argument("spectral_error: shape mismatch");
  const Matrix residual = recon - target;
  auto plan = plan_for(residual.cols());
  return residual_spectral_error(residual, 0, residual.cols(), plan.get());
}

Vector frequency_point_score(const Matrix& target, const Matrix& recon, Eigen::Index patch,
                             Eigen::Index stride) {
  if (target.rows() != recon.rows() || target.cols() != recon.cols())
    throw std::invalid_argument("frequency_point_score: shape mismatch");
  const auto length = target.cols();
  if (patch < 1 || patch > length) {
    throw std::invalid_argument("inference patch size " + std::to_string(patch) +
                                " must be in [1, " + std::to_string(length) + "]");
  }
  if (stride < 1 || stride > patch)
    throw std::invalid_argument("inference patch stride must be in [1, patch size]");

  const auto channels = target.rows();
  const auto patch_num = (length - patch) / stride + 1;
  const auto padding = length - (patch + (patch_num - 1) * stride);
  const Matrix residual = recon - target;
  auto plan = plan_for(patch);

  // Scatter each patch's per-channel error onto the timestamps it covers.
  Matrix sum = Matrix::Zero(channels, length);
  Vector count = Vector::Zero(length);
  for (Eigen::Index j = 0; j < patch_num; ++j) {
    const Vector err = residual_spectral_error(residual, j * stride, patch, plan.get());
    sum.middleCols(j * stride, patch).colwise() += err;
    count.segment(j * stride, patch).array() += 1.0;
  }
  Matrix per_channel(channels, length);
  const auto main_len = length - padding;
  for (Eigen::Index t = 0; t < main_len; ++t) per_channel.col(t) = sum.col(t) / count(t);
  if (padding > 0) {
    auto tail_plan = plan_for(padding);
    const Vector err = residual_spectral_error(residual, main_len, padding, tail_plan.get());
    per_channel.rightCols(padding).colwise() = err;
  }
  return per_channel.colwise().mean().transpose();
}

Vector frequency_window_score(const Matrix& target, const Matrix& recon) {
  return Vector::Constant(target.cols(), spectral_error(target, recon).mean());
}

Eigen::Index coverage_count(Eigen::Index t, Eigen::Index length, Eigen::Index patch) {
  return std::min(t, length - patch) - std::max<Eigen::Index>(0, t - patch + 1) + 1;
}

Vector combine_scores(const Vector& time, const Vector& freq, double score_lambda) {
  if (time.size() != freq.size()) throw std::invalid_argument("combine_scores: length mismatch");
  return time + score_lambda * freq;
}

double threshold_value(const Vector& scores, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("threshold ratio must be in (0, 1)");
  if (scores.size() == 0) throw std::invalid_argument("cannot threshold an empty score vector");
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<Eigen::Index>(std::ceil((1.0 - ratio) * n - 1e-9));
  rank = std::clamp<Eigen::Index>(rank, 1, static_cast<Eigen::Index>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

Labels apply_threshold(const Vector& scores, double ratio) {
  const double thr = threshold_value(scores, ratio);
  Labels out(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    out[static_cast<std::size_t>(i)] = scores(i) > thr ? 1 : 0;
  return out;
}

ScoreSeries score_series(const ModelParams& params, const LabeledSeries& series,
                         const ModelConfig& model_config, const ScoreConfig& score_config) {
  model_config.validate();
  score_config.validate(model_config.window);
  check_params(params, model_config);
  if (series.channels() != model_config.channels) {
    throw std::invalid_argument("series has " + std::to_string(series.channels()) +
                                " channels, model expects N=" +
                                std::to_string(model_config.channels));
  }
  const auto t = model_config.window;
  const auto n = model_config.channels;
  if (series.length() < t) {
    throw std::invalid_argument("series length " + std::to_string(series.length()) +
                                " is shorter than the window " + std::to_string(t));
  }
  CatchModel model(model_config);
  const auto windows = make_windows(series, t, t);

  ScoreSeries out;
  out.time_score = Vector::Zero(series.length());
  out.freq_score = Vector::Zero(series.length());
  Rng unused(0);
  constexpr std::size_t kChunk = 64;
  for (std::size_t first = 0; first < windows.size(); first += kChunk) {
    const auto count = std::min(kChunk, windows.size() - first);
    Matrix batch(static_cast<Eigen::Index>(count) * n, t);
    for (std::size_t b = 0; b < count; ++b)
      batch.middleRows(static_cast<Eigen::Index>(b) * n, n) =
          instance_normalize(windows[first + b]).values;
    const auto st = model.forward_batch(batch, params, false, unused);
    // Windows are visited in order, so the later window wins on overlap.
    for (std::size_t b = 0; b < count; ++b) {
      const auto rows = static_cast<Eigen::Index>(b) * n;
      const Matrix x = batch.middleRows(rows, n);
      const Matrix xr = st.recon_time.middleRows(rows, n);
      const auto origin = windows[first + b].origin_index;
      out.time_score.segment(origin, t) = time_score(x, xr);
      out.freq_score.segment(origin, t) =
          score_config.mode == ScoreMode::Point
              ? frequency_point_score(x, xr, score_config.inference_patch_size,
                                      score_config.inference_patch_stride)
              : frequency_window_score(x, xr);
    }
  }
  out.final_score = combine_scores(out.time_score, out.freq_score, score_config.score_lambda);
  out.predictions = apply_threshold(out.final_score, score_config.threshold_ratio);
  out.labels = series.labels;
  return out;
}

void write_score_csv(const std::filesystem::path& path, const ScoreSeries& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write score CSV: " + path.string());
  out << "index,time_score,freq_score,final_score,prediction";
  if (s.labels) out << ",label";
  out << '\n';
  char buf[160];
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const int pred = s.predictions ? (*s.predictions)[static_cast<std::size_t>(i)] : 0;
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%d", static_cast<long>(i),
                  s.time_score(i), s.freq_score(i), s.final_score(i), pred);
    out << buf;
    if (s.labels) out << ',' << static_cast<int>((*s.labels)[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing score CSV: " + path.string());
}

ScoreSeries read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::runtime_error(path.string() + ": empty score file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"index", "time_score", "freq_score", "final_score", "prediction"}) {
    if (!col.count(required)) {
      throw std::runtime_error(path.string() + ": line 1: missing column '" +
                               std::string(required) + "'");
    }
  }
  const bool has_label = col.count("label") > 0;

  std::vector<double> ts, fs, final;
  Labels pred, labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " cells, found " +
                               std::to_string(cells.size()));
    }
    auto num = [&](const char* name) {
      const auto& text = cells[col.at(name)];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                                 ": bad value '" + text + "' in column " + name);
      }
      return v;
    };
    auto flag = [&](const char* name) {
      const double v = num(name);
      if (v != 0.0 && v != 1.0) {
        throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) + ": column " +
                                 name + " must be 0 or 1");
      }
      return static_cast<std::uint8_t>(v);
    };
    ts.push_back(num("time_score"));
    fs.push_back(num("freq_score"));
    final.push_back(num("final_score"));
    pred.push_back(flag("prediction"));
    if (has_label) labels.push_back(flag("label"));
  }
  if (final.empty()) throw std::runtime_error(path.string() + ": score file has no rows");

  ScoreSeries s;
  s.time_score = Eigen::Map<Vector>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  s.freq_score = Eigen::Map<Vector>(fs.data(), static_cast<Eigen::Index>(fs.size()));
  s.final_score = Eigen::Map<Vector>(final.data(), static_cast<Eigen::Index>(final.size()));
  s.predictions = std::move(pred);
  if (has_label) s.labels = std::move(labels);
  return s;
}

}  // namespace catchad

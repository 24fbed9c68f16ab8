#pragma once

#include "catchad/metrics.hpp"
#include "catchad/scoring.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace catchad::cli {

inline constexpr char kToolVersion[] = "0.1.0";

struct GenerateOptions {
  std::string type;
  std::optional<std::uint64_t> seed;  // falls back to CATCH_SEED, then 0
  std::filesystem::path out_dir;
};

struct TrainOptions {
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path data_dir;  // holds train.csv
  std::filesystem::path out_path;  // checkpoint
  std::optional<std::filesystem::path> losses_path;  // default: losses.csv beside the checkpoint
  std::optional<double> epochs;
  std::optional<long> outer_iterations;
  std::optional<std::uint64_t> seed;
};

struct ScoreOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;  // CSV file, or a directory holding test.csv
  std::filesystem::path out_csv;
  std::optional<double> score_lambda;
  std::optional<Eigen::Index> inference_patch_size;
  std::optional<std::string> score_mode;
  std::optional<double> threshold_ratio;
};

struct EvalOptions {
  std::filesystem::path scores_csv;
  std::filesystem::path out_path;
};

struct PlotOptions {
  std::filesystem::path scores_csv;
  std::filesystem::path out_svg;
};

/// Seed from the CATCH_SEED environment variable, if set and valid.
std::optional<std::uint64_t> env_seed();

void cmd_generate(const GenerateOptions& opts);
void cmd_train(const TrainOptions& opts);
ScoreSeries cmd_score(const ScoreOptions& opts);
MetricReport cmd_eval(const EvalOptions& opts, std::ostream& out);
void cmd_plot(const PlotOptions& opts);

/// SVG text with three <g> tracks: labels/predictions, time and frequency
/// scores, final score with its threshold.
std::string render_svg(const ScoreSeries& scores);

/// Parses argv and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace catchad::cli

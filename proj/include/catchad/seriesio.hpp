#pragma once

#include "catchad/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace catchad {

using Labels = std::vector<std::uint8_t>;

/// A multivariate series stored channels x time, with optional 0/1 labels.
struct LabeledSeries {
  Matrix values;  // N x length
  std::optional<Labels> labels;
  std::vector<std::string> channel_names;

  Eigen::Index channels() const { return values.rows(); }
  Eigen::Index length() const { return values.cols(); }

  /// Throws if labels or names disagree with the value shape.
  void validate() const;
};

struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
};

struct TimeWindow {
  Matrix values;  // N x T
  std::vector<NormStats> norm_stats;
  Eigen::Index origin_index = 0;
};

/// Reads a header-first CSV. Every column except `label_column` is a channel.
LabeledSeries load_csv(const std::filesystem::path& path,
                       const std::optional<std::string>& label_column = std::nullopt);

/// Writes values at round-trip precision; the label column (if any) is last.
void write_csv(const std::filesystem::path& path, const LabeledSeries& series,
               const std::string& label_column = "label");

/// Per-channel zero mean / unit population stddev. Constant channels use
/// stddev 1 so they map to zeros.
TimeWindow instance_normalize(const TimeWindow& window);

/// Windows at 0, stride, 2*stride, ... plus a tail window anchored at
/// length - T when the tiling does not reach the end.
std::vector<TimeWindow> make_windows(const LabeledSeries& series, Eigen::Index window,
                                     Eigen::Index stride);

/// Start offsets produced by make_windows.
std::vector<Eigen::Index> window_starts(Eigen::Index length, Eigen::Index window,
                                        Eigen::Index stride);

}  // namespace catchad

#pragma once

#include "catchad/seriesio.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace catchad {

enum class Behavior { Sine, Cosine };

struct SynthConfig {
  Eigen::Index dims = 5;
  Eigen::Index train_length = 20000;
  Eigen::Index test_length = 5000;
  std::vector<Behavior> behaviors = {Behavior::Sine, Behavior::Cosine, Behavior::Sine,
                                     Behavior::Cosine, Behavior::Sine};
  double freq = 0.04;  // cycles per step
  double coef = 1.5;
  double offset = 0.0;
  double noise_amp = 0.05;  // half-width of the uniform noise
  std::uint64_t seed = 0;

  void validate() const;
};

/// Square-wave base levels, applied cyclically along time.
inline constexpr std::array<double, 9> kSquareBaseValues = {0.145, 0.128, 0.094, 0.077, 0.111,
                                                            0.145, 0.179, 0.214, 0.214};

enum class InjectionKind {
  PointGlobal,
  PointContextual,
  CollectiveGlobalSquare,
  CollectiveSeasonal,
  CollectiveTrend,
};

struct InjectionSpec {
  InjectionKind kind = InjectionKind::PointGlobal;
  double ratio = 0.01;
  double factor = 3.5;
  Eigen::Index radius = 5;
  // square-wave replacement
  double square_coef = 1.5;
  double square_noise_amp = 0.03;
  int square_level = 20;
  double square_freq = 0.04;
  double square_offset = 0.0;
  std::vector<double> square_base{kSquareBaseValues.begin(), kSquareBaseValues.end()};

  void validate() const;
};

/// The six dataset families.
enum class AnomalyType { Global, Contextual, Shapelet, Seasonal, Trend, Mixed };

AnomalyType parse_anomaly_type(const std::string& name);
std::string to_string(AnomalyType type);
const std::vector<std::string>& anomaly_type_names();

/// Injections applied to every channel for a dataset family.
std::vector<InjectionSpec> injections_for(AnomalyType type);

/// coef * behavior(2 pi freq t) + offset + U(-noise_amp, noise_amp), per channel.
Matrix generate_base(const SynthConfig& config, Eigen::Index length, Rng& rng);

struct InjectionResult {
  Matrix values;
  Labels labels;  // 1 on mutated timestamps of this injection
};

/// Mutates one channel. `clean` is the injection-free series the point and
/// trend injectors measure against.
InjectionResult inject(const Matrix& series, const Matrix& clean, Eigen::Index channel,
                       const InjectionSpec& spec, const SynthConfig& config, Rng& rng);

struct SynthDataset {
  LabeledSeries train;
  LabeledSeries test;
};

SynthDataset synthesize(AnomalyType type, std::uint64_t seed, SynthConfig config = {});

/// Writes train.csv, test.csv and manifest.txt into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data, AnomalyType type,
                   const SynthConfig& config);

}  // namespace catchad

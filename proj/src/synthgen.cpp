#include "catchad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace catchad {

void SynthConfig::validate() const {
  if (dims < 1) throw std::invalid_argument("synth: dims must be >= 1");
  if (train_length < 1 || test_length < 1) throw std::invalid_argument("synth: lengths must be > 0");
  if (!(freq > 0.0)) throw std::invalid_argument("synth: freq must be > 0");
  if (!(noise_amp >= 0.0)) throw std::invalid_argument("synth: noise_amp must be >= 0");
  if (static_cast<Eigen::Index>(behaviors.size()) != dims)
    throw std::invalid_argument("synth: one behavior per dimension required");
}

void InjectionSpec::validate() const {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("injection ratio must be in [0, 1)");
  if (radius < 1) throw std::invalid_argument("injection radius must be >= 1");
  if (kind == InjectionKind::CollectiveGlobalSquare && square_base.empty())
    throw std::invalid_argument("square injection needs a non-empty base table");
}

const std::vector<std::string>& anomaly_type_names() {
  static const std::vector<std::string> names = {"global", "contextual", "shapelet",
                                                 "seasonal", "trend", "mixed"};
  return names;
}

AnomalyType parse_anomaly_type(const std::string& name) {
  const auto& names = anomaly_type_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<AnomalyType>(i);
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown anomaly type '" + name + "' (valid: " + valid + ")");
}

std::string to_string(AnomalyType type) {
  return anomaly_type_names()[static_cast<std::size_t>(type)];
}

std::vector<InjectionSpec> injections_for(AnomalyType type) {
  InjectionSpec s;
  switch (type) {
    case AnomalyType::Global:
      s.kind = InjectionKind::PointGlobal;
      s.factor = 3.5;
      return {s};
    case AnomalyType::Contextual:
      s.kind = InjectionKind::PointContextual;
      s.factor = 2.5;
      return {s};
    case AnomalyType::Shapelet:
      s.kind = InjectionKind::CollectiveGlobalSquare;
      return {s};
    case AnomalyType::Seasonal:
      s.kind = InjectionKind::CollectiveSeasonal;
      s.factor = 3.0;
      return {s};
    case AnomalyType::Trend:
      s.kind = InjectionKind::CollectiveTrend;
      s.factor = 0.5;
      return {s};
    case AnomalyType::Mixed: {
      InjectionSpec square = s, seasonal = s, trend = s;
      square.kind = InjectionKind::CollectiveGlobalSquare;
      seasonal.kind = InjectionKind::CollectiveSeasonal;
      seasonal.factor = 3.0;
      trend.kind = InjectionKind::CollectiveTrend;
      trend.factor = 0.5;
      for (auto* spec : {&square, &seasonal, &trend}) spec->ratio = 0.006;
      return {square, seasonal, trend};
    }
  }
  throw std::invalid_argument("unknown anomaly type");
}

namespace {

double waveform(Behavior b, double phase) { return b == Behavior::Sine ? std::sin(phase) : std::cos(phase); }

RowVector channel_wave(Behavior b, double freq, double coef, double offset, double noise_amp,
                       Eigen::Index length, Rng& rng) {
  std::uniform_real_distribution<double> noise(-noise_amp, noise_amp);
  RowVector out(length);
  for (Eigen::Index t = 0; t < length; ++t) {
    const double phase = 2.0 * std::numbers::pi * freq * static_cast<double>(t);
    out(t) = coef * waveform(b, phase) + offset + (noise_amp > 0.0 ? noise(rng) : 0.0);
  }
  return out;
}

/// Truncated Fourier series of a square wave, lifted by the cyclic base table.
RowVector square_wave(const InjectionSpec& s, Eigen::Index length, Rng& rng) {
  std::uniform_real_distribution<double> noise(-s.square_noise_amp, s.square_noise_amp);
  RowVector out(length);
  for (Eigen::Index t = 0; t < length; ++t) {
    double v = 0.0;
    for (int i = 0; i < s.square_level; ++i) {
      const double harmonic = 2.0 * i + 1.0;
      v += std::sin(2.0 * std::numbers::pi * s.square_freq * harmonic * static_cast<double>(t)) /
           harmonic;
    }
    v = s.square_coef * v + s.square_offset +
        s.square_base[static_cast<std::size_t>(t) % s.square_base.size()];
    if (s.square_noise_amp > 0.0) v += noise(rng);
    out(t) = v;
  }
  return out;
}

std::vector<Eigen::Index> draw_positions(std::size_t count, Eigen::Index length, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Index> pos(count);
  for (auto& p : pos)
    p = std::min<Eigen::Index>(static_cast<Eigen::Index>(u(rng) * static_cast<double>(length)),
                               length - 1);
  return pos;
}

double local_std(const RowVector& x, Eigen::Index lo, Eigen::Index hi) {
  const auto seg = x.segment(lo, hi - lo);
  const double mean = seg.mean();
  return std::sqrt((seg.array() - mean).square().mean());
}

const char* kind_name(InjectionKind k) {
  switch (k) {
    case InjectionKind::PointGlobal: return "point_global";
    case InjectionKind::PointContextual: return "point_contextual";
    case InjectionKind::CollectiveGlobalSquare: return "collective_square";
    case InjectionKind::CollectiveSeasonal: return "collective_seasonal";
    case InjectionKind::CollectiveTrend: return "collective_trend";
  }
  return "unknown";
}

}  // namespace

Matrix generate_base(const SynthConfig& config, Eigen::Index length, Rng& rng) {
  config.validate();
  Matrix out(config.dims, length);
  for (Eigen::Index c = 0; c < config.dims; ++c)
    out.row(c) = channel_wave(config.behaviors[static_cast<std::size_t>(c)], config.freq,
                              config.coef, config.offset, config.noise_amp, length, rng);
  return out;
}

InjectionResult inject(const Matrix& series, const Matrix& clean, Eigen::Index channel,
                       const InjectionSpec& spec, const SynthConfig& config, Rng& rng) {
  spec.validate();
  if (channel < 0 || channel >= series.rows()) throw std::invalid_argument("inject: bad channel");
  const auto length = series.cols();
  InjectionResult res{series, Labels(static_cast<std::size_t>(length), 0)};
  RowVector data = series.row(channel);
  const RowVector origin = clean.row(channel);
  const auto r = spec.radius;

  switch (spec.kind) {
    case InjectionKind::PointGlobal:
    case InjectionKind::PointContextual: {
      const auto count = static_cast<std::size_t>(std::llround(static_cast<double>(length) * spec.ratio));
      const auto positions = draw_positions(count, length, rng);
      const double maximum = data.maxCoeff();
      const double minimum = data.minCoeff();
      std::normal_distribution<double> shrink(0.0, 0.5);
      for (auto i : positions) {
        // Rescale the clean value by the spread of its radius neighborhood.
        const auto lo = std::max<Eigen::Index>(0, i - r);
        const auto hi = std::min<Eigen::Index>(length, i + r);
        double v = origin(i) * spec.factor * local_std(origin, lo, hi);
        if (spec.kind == InjectionKind::PointGlobal) {
          // global outliers reach at least the series extremes
          if (v >= 0.0 && v < maximum) v = maximum;
          if (v < 0.0 && v > minimum) v = minimum;
        } else {
          // contextual outliers stay inside the global range
          if (v > maximum) v = maximum * std::min(0.95, std::abs(shrink(rng)));
          if (v < minimum) v = minimum * std::min(0.95, std::abs(shrink(rng)));
        }
        data(i) = v;
        res.labels[static_cast<std::size_t>(i)] = 1;
      }
      break;
    }
    case InjectionKind::CollectiveGlobalSquare:
    case InjectionKind::CollectiveSeasonal:
    case InjectionKind::CollectiveTrend: {
      const auto count = static_cast<std::size_t>(
          std::llround(static_cast<double>(length) * spec.ratio / (2.0 * static_cast<double>(r))));
      const auto positions = draw_positions(count, length, rng);
      RowVector replacement;
      if (spec.kind == InjectionKind::CollectiveGlobalSquare) {
        replacement = square_wave(spec, length, rng);
      } else if (spec.kind == InjectionKind::CollectiveSeasonal) {
        replacement = channel_wave(config.behaviors[static_cast<std::size_t>(channel)],
                                   config.freq * spec.factor, config.coef, config.offset,
                                   config.noise_amp, length, rng);
      }
      std::bernoulli_distribution coin(0.5);
      for (auto i : positions) {
        const auto lo = std::max<Eigen::Index>(0, i - r);
        const auto hi = std::min<Eigen::Index>(length, i + r);
        if (spec.kind == InjectionKind::CollectiveTrend) {
          const double slope = (coin(rng) ? 1.0 : -1.0) * spec.factor;
          for (Eigen::Index t = lo; t < hi; ++t)
            data(t) = origin(t) + slope * static_cast<double>(t - lo);
        } else {
          data.segment(lo, hi - lo) = replacement.segment(lo, hi - lo);
        }
        for (Eigen::Index t = lo; t < hi; ++t) res.labels[static_cast<std::size_t>(t)] = 1;
      }
      break;
    }
  }
  res.values.row(channel) = data;
  return res;
}

SynthDataset synthesize(AnomalyType type, std::uint64_t seed, SynthConfig config) {
  config.seed = seed;
  config.validate();
  Rng rng(seed);
  SynthDataset ds;
  auto names = [&] {
    std::vector<std::string> v;
    for (Eigen::Index c = 0; c < config.dims; ++c) v.push_back("ch" + std::to_string(c));
    return v;
  }();

  ds.train.values = generate_base(config, config.train_length, rng);
  ds.train.labels = Labels(static_cast<std::size_t>(config.train_length), 0);
  ds.train.channel_names = names;

  const Matrix clean = generate_base(config, config.test_length, rng);
  Matrix test = clean;
  Labels labels(static_cast<std::size_t>(config.test_length), 0);
  const auto specs = injections_for(type);
  for (Eigen::Index c = 0; c < config.dims; ++c) {
    for (const auto& spec : specs) {
      auto res = inject(test, clean, c, spec, config, rng);
      test = std::move(res.values);
      for (std::size_t t = 0; t < labels.size(); ++t) labels[t] |= res.labels[t];
    }
  }
  ds.test.values = std::move(test);
  ds.test.labels = std::move(labels);
  ds.test.channel_names = names;
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data, AnomalyType type,
                   const SynthConfig& config) {
  std::filesystem::create_directories(dir);
  // train labels are all zero; the file carries only channels
  LabeledSeries train = data.train;
  train.labels.reset();
  write_csv(dir / "train.csv", train);
  write_csv(dir / "test.csv", data.test);

  std::ofstream m(dir / "manifest.txt", std::ios::binary);
  if (!m) throw std::runtime_error("cannot write dataset manifest in " + dir.string());
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  m << "type=" << to_string(type) << '\n'
    << "seed=" << config.seed << '\n'
    << "dims=" << config.dims << '\n'
    << "train_length=" << config.train_length << '\n'
    << "test_length=" << config.test_length << '\n'
    << "behaviors=";
  for (std::size_t i = 0; i < config.behaviors.size(); ++i)
    m << (i ? "," : "") << (config.behaviors[i] == Behavior::Sine ? "sine" : "cosine");
  m << '\n'
    << "freq=" << num(config.freq) << '\n'
    << "coef=" << num(config.coef) << '\n'
    << "offset=" << num(config.offset) << '\n'
    << "noise_amp=" << num(config.noise_amp) << '\n';
  int k = 0;
  for (const auto& s : injections_for(type)) {
    const std::string p = "injection." + std::to_string(k++) + ".";
    m << p << "kind=" << kind_name(s.kind) << '\n'
      << p << "ratio=" << num(s.ratio) << '\n'
      << p << "factor=" << num(s.factor) << '\n'
      << p << "radius=" << s.radius << '\n';
    if (s.kind == InjectionKind::CollectiveGlobalSquare) {
      m << p << "coef=" << num(s.square_coef) << '\n'
        << p << "noise_amp=" << num(s.square_noise_amp) << '\n'
        << p << "level=" << s.square_level << '\n'
        << p << "freq=" << num(s.square_freq) << '\n'
        << p << "offset=" << num(s.square_offset) << '\n'
        << p << "base=";
      for (std::size_t i = 0; i < s.square_base.size(); ++i) m << (i ? "," : "") << num(s.square_base[i]);
      m << '\n';
    }
  }
  if (!m) throw std::runtime_error("failed writing dataset manifest in " + dir.string());
}

}  // namespace catchad

#include "catchad/seriesio.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace catchad {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t lead = 0;
    while (lead < cell.size() && cell[lead] == ' ') ++lead;
    cells.push_back(cell.substr(lead));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void LabeledSeries::validate() const {
  if (values.rows() < 1) throw std::invalid_argument("series needs at least one channel");
  if (values.cols() < 2) throw std::invalid_argument("series needs at least two timestamps");
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != values.cols())
      throw std::invalid_argument("label vector length differs from series length");
    for (auto v : *labels)
      if (v > 1) throw std::invalid_argument("labels must be 0 or 1");
  }
  if (!channel_names.empty() && static_cast<Eigen::Index>(channel_names.size()) != values.rows())
    throw std::invalid_argument("channel name count differs from channel count");
}

LabeledSeries load_csv(const std::filesystem::path& path,
                       const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path.string());
  auto header = split_csv_line(line);

  std::optional<std::size_t> label_idx;
  LabeledSeries series;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (label_column && header[c] == *label_column) {
      label_idx = c;
    } else {
      series.channel_names.push_back(header[c]);
    }
  }
  if (label_column && !label_idx)
    throw std::runtime_error("label column '" + *label_column + "' not found in " + path.string());
  const std::size_t n_channels = series.channel_names.size();
  if (n_channels == 0) throw std::runtime_error("CSV has no channel columns: " + path.string());

  std::vector<std::vector<double>> columns(n_channels);
  Labels labels;
  std::size_t row = 1;  // header is line 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    std::size_t ch = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const bool ok = parse_double(cells[c], v);
      if (label_idx && c == *label_idx) {
        if (!ok || (v != 0.0 && v != 1.0)) {
          throw std::runtime_error(path.string() + ": line " + std::to_string(row) +
                                   ", column '" + header[c] + "': label must be 0 or 1, got '" +
                                   cells[c] + "'");
        }
        labels.push_back(static_cast<std::uint8_t>(v));
        continue;
      }
      if (!ok || !std::isfinite(v)) {
        throw std::runtime_error(path.string() + ": line " + std::to_string(row) + ", column '" +
                                 header[c] + "': not a finite number: '" + cells[c] + "'");
      }
      columns[ch++].push_back(v);
    }
  }

  const auto length = static_cast<Eigen::Index>(columns[0].size());
  series.values.resize(static_cast<Eigen::Index>(n_channels), length);
  for (std::size_t c = 0; c < n_channels; ++c)
    for (Eigen::Index t = 0; t < length; ++t)
      series.values(static_cast<Eigen::Index>(c), t) = columns[c][static_cast<std::size_t>(t)];
  if (label_idx) series.labels = std::move(labels);
  series.validate();
  return series;
}

void write_csv(const std::filesystem::path& path, const LabeledSeries& series,
               const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path.string());
  const auto n = series.channels();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (c) out << ',';
    if (static_cast<Eigen::Index>(series.channel_names.size()) == n)
      out << series.channel_names[static_cast<std::size_t>(c)];
    else
      out << "ch" << c;
  }
  if (series.labels) out << ',' << label_column;
  out << '\n';
  for (Eigen::Index t = 0; t < series.length(); ++t) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c) out << ',';
      out << format_double(series.values(c, t));
    }
    if (series.labels) out << ',' << static_cast<int>((*series.labels)[static_cast<std::size_t>(t)]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing CSV file: " + path.string());
}

TimeWindow instance_normalize(const TimeWindow& window) {
  const auto n = window.values.rows();
  const auto t = window.values.cols();
  if (t < 2) throw std::invalid_argument("instance_normalize needs at least two timestamps");
  TimeWindow out;
  out.origin_index = window.origin_index;
  out.values.resize(n, t);
  out.norm_stats.resize(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const double mean = window.values.row(c).mean();
    const double var = (window.values.row(c).array() - mean).square().mean();
    double sd = std::sqrt(var);
    // Exact-constant channels (and numerically flat ones) keep a unit scale.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    out.values.row(c) = (window.values.row(c).array() - mean) / sd;
    out.norm_stats[static_cast<std::size_t>(c)] = {mean, sd};
  }
  return out;
}

std::vector<Eigen::Index> window_starts(Eigen::Index length, Eigen::Index window,
                                        Eigen::Index stride) {
  if (window < 1) throw std::invalid_argument("window size must be positive");
  if (stride < 1) throw std::invalid_argument("window stride must be positive");
  if (window > length) {
    throw std::invalid_argument("window size " + std::to_string(window) +
                                " exceeds series length " + std::to_string(length));
  }
  std::vector<Eigen::Index> starts;
  for (Eigen::Index s = 0; s + window <= length; s += stride) starts.push_back(s);
  if (starts.back() + window < length) starts.push_back(length - window);
  return starts;
}

std::vector<TimeWindow> make_windows(const LabeledSeries& series, Eigen::Index window,
                                     Eigen::Index stride) {
  std::vector<TimeWindow> out;
  for (auto s : window_starts(series.length(), window, stride)) {
    TimeWindow w;
    w.values = series.values.middleCols(s, window);
    w.norm_stats.assign(static_cast<std::size_t>(series.channels()), NormStats{});
    w.origin_index = s;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace catchad

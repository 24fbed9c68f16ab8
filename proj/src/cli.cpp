#include "catchad/cli.hpp"

#include "catchad/checkpoint.hpp"
#include "catchad/config.hpp"
#include "catchad/synthgen.hpp"
#include "catchad/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace catchad::cli {
namespace fs = std::filesystem;
namespace {

/// Outputs are written under temporary names and renamed on commit; anything
/// staged but not committed is removed.
class Staging {
 public:
  fs::path stage(const fs::path& final_path) {
    if (final_path.has_parent_path()) fs::create_directories(final_path.parent_path());
    fs::path tmp = final_path;
    tmp += ".partial";
    entries_.push_back({tmp, final_path});
    return tmp;
  }

  void commit() {
    for (const auto& [tmp, final_path] : entries_) fs::rename(tmp, final_path);
    entries_.clear();
  }

  ~Staging() {
    std::error_code ec;
    for (const auto& e : entries_) fs::remove_all(e.first, ec);
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> entries_;
};

struct Manifest {
  Manifest(std::string cmd, std::uint64_t run_seed) : command(std::move(cmd)), seed(run_seed) {}

  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs, outputs;
  std::string config_text;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    std::ofstream m(path, std::ios::binary | std::ios::app);
    if (!m) throw std::runtime_error("cannot write manifest " + path.string());
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m << "command=" << command << '\n' << "tool_version=" << kToolVersion << '\n' << "run_seed=" << seed << '\n';
    for (const auto& [k, v] : inputs) m << "input." << k << '=' << v << '\n';
    for (const auto& [k, v] : outputs) m << "output." << k << '=' << v << '\n';
    std::istringstream cfg(config_text);
    for (std::string line; std::getline(cfg, line);) m << "config." << line << '\n';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", seconds);
    m << "wall_clock_seconds=" << buf << '\n';
  }
};

fs::path manifest_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.txt";
  return p;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw std::runtime_error("input not found: " + p.string());
}

std::string read_header(const fs::path& path) {
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  return header;
}

bool has_label_column(const fs::path& csv) {
  std::istringstream h(read_header(csv));
  for (std::string cell; std::getline(h, cell, ',');) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    if (cell == "label") return true;
  }
  return false;
}

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("CATCH_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0' || v[0] == '-') throw std::invalid_argument(std::string("CATCH_SEED is not an unsigned integer: ") + v);
  return s;
}

void cmd_generate(const GenerateOptions& opts) {
  const AnomalyType type = parse_anomaly_type(opts.type);
  SynthConfig config;
  config.seed = opts.seed ? *opts.seed : env_seed().value_or(0);
  Manifest manifest{"generate", config.seed};

  Staging staging;
  const fs::path tmp_dir = staging.stage(opts.out_dir / ".generate");
  write_dataset(tmp_dir, synthesize(type, config.seed, config), type, config);
  for (const char* name : {"train.csv", "test.csv"}) manifest.outputs.push_back({name, (opts.out_dir / name).string()});
  manifest.write(tmp_dir / "manifest.txt");
  Staging files;
  for (const char* name : {"train.csv", "test.csv", "manifest.txt"}) {
    fs::rename(tmp_dir / name, files.stage(opts.out_dir / name));
  }
  files.commit();
}

void cmd_train(const TrainOptions& opts) {
  RunConfig config;
  if (opts.config_path) config = load_config(*opts.config_path);
  if (auto s = env_seed()) config.train.seed = *s;
  if (opts.seed) config.train.seed = *opts.seed;
  if (opts.epochs) config.train.epochs = *opts.epochs;
  if (opts.outer_iterations) config.train.outer_iterations = *opts.outer_iterations;

  if (!fs::is_directory(opts.data_dir)) throw std::runtime_error("data directory not found: " + opts.data_dir.string());
  const fs::path train_csv = opts.data_dir / "train.csv";
  require_file(train_csv);
  const LabeledSeries data = load_csv(train_csv);
  if (!config.has("channels")) config.model.channels = data.channels();
  if (data.channels() != config.model.channels)
    throw std::invalid_argument("train data has " + std::to_string(data.channels()) +
                                " channels but the config expects " + std::to_string(config.model.channels));
  config.validate();

  Rng init_rng(config.train.seed);
  ModelParams init = init_params(config.model, init_rng);
  const auto windows = make_windows(data, config.model.window, config.train_stride);
  TrainResult result = bilevel_train(windows, std::move(init), config.model, config.train);

  const fs::path losses = opts.losses_path.value_or(opts.out_path.parent_path() / "losses.csv");
  Manifest manifest{"train", config.train.seed};
  manifest.inputs = {{"data", train_csv.string()}};
  if (opts.config_path) manifest.inputs.push_back({"config", opts.config_path->string()});
  manifest.outputs = {{"checkpoint", opts.out_path.string()}, {"losses", losses.string()}};
  manifest.config_text = to_config_text(config);

  Staging staging;
  save_checkpoint(staging.stage(opts.out_path), result.params, config);
  write_loss_history(staging.stage(losses), result.report);
  manifest.write(staging.stage(manifest_for(opts.out_path)));
  staging.commit();
}

ScoreSeries cmd_score(const ScoreOptions& opts) {
  require_file(opts.checkpoint);
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  RunConfig config = ck.config;
  if (opts.score_lambda) config.score.score_lambda = *opts.score_lambda;
  if (opts.inference_patch_size) config.score.inference_patch_size = *opts.inference_patch_size;
  if (opts.score_mode) config.score.mode = parse_score_mode(*opts.score_mode);
  if (opts.threshold_ratio) config.score.threshold_ratio = *opts.threshold_ratio;
  config.score.validate(config.model.window);

  const fs::path data = fs::is_directory(opts.data) ? opts.data / "test.csv" : opts.data;
  require_file(data);
  const std::optional<std::string> label_col =
      has_label_column(data) ? std::optional<std::string>("label") : std::nullopt;
  const LabeledSeries series = load_csv(data, label_col);
  ScoreSeries scores = score_series(ck.params, series, config.model, config.score);

  Manifest manifest{"score", config.train.seed};
  manifest.inputs = {{"checkpoint", opts.checkpoint.string()}, {"data", data.string()}};
  manifest.outputs = {{"scores", opts.out_csv.string()}};
  manifest.config_text = to_config_text(config);
  Staging staging;
  write_score_csv(staging.stage(opts.out_csv), scores);
  manifest.write(staging.stage(manifest_for(opts.out_csv)));
  staging.commit();
  return scores;
}

MetricReport cmd_eval(const EvalOptions& opts, std::ostream& out) {
  require_file(opts.scores_csv);
  const ScoreSeries scores = read_score_csv(opts.scores_csv);
  if (!scores.labels) throw std::invalid_argument(opts.scores_csv.string() + ": score file has no label column");
  const Labels predictions =
      scores.predictions ? *scores.predictions : apply_threshold(scores.final_score, ScoreConfig{}.threshold_ratio);
  MetricReport report = evaluate_metrics(scores.final_score, predictions, *scores.labels);
  const std::string text = to_key_value(report);
  out << text;
  for (const auto& e : report.errors) out << "error: " << e << '\n';

  Manifest manifest{"eval", 0};
  manifest.inputs = {{"scores", opts.scores_csv.string()}};
  manifest.outputs = {{"report", opts.out_path.string()}};
  Staging staging;
  {
    std::ofstream f(staging.stage(opts.out_path), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + opts.out_path.string());
    f << text;
    for (const auto& e : report.errors) f << "error=" << e << '\n';
  }
  manifest.write(staging.stage(manifest_for(opts.out_path)));
  staging.commit();
  return report;
}

std::string render_svg(const ScoreSeries& s) {
  const Eigen::Index n = s.size();
  if (n == 0) throw std::invalid_argument("cannot plot an empty score series");
  constexpr double kWidth = 1000.0, kTrack = 150.0, kGap = 20.0, kLeft = 60.0, kRight = 20.0;
  const double plot_w = kWidth - kLeft - kRight;
  auto x_of = [&](Eigen::Index i) { return kLeft + (n == 1 ? 0.0 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1)); };

  auto polyline = [&](const Vector& v, double top, double lo, double hi, const char* color) {
    const double span = hi > lo ? hi - lo : 1.0;
    std::string pts;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = top + kTrack - kTrack * (v(i) - lo) / span;
      pts += (i ? " " : "") + fmt(x_of(i), "%.2f") + "," + fmt(y, "%.2f");
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
  };
  auto bands = [&](const Labels& l, double top, double height, const char* color) {
    std::string out;
    for (const auto& e : events_from_labels(l)) {
      const double x0 = x_of(e.start), x1 = x_of(e.end - 1) + plot_w / static_cast<double>(n);
      out += "<rect x=\"" + fmt(x0, "%.2f") + "\" y=\"" + fmt(top, "%.2f") + "\" width=\"" + fmt(x1 - x0, "%.2f") +
             "\" height=\"" + fmt(height, "%.2f") + "\" fill=\"" + color + "\"/>\n";
    }
    return out;
  };
  auto title = [&](double top, const std::string& text) {
    return "<text x=\"" + fmt(kLeft, "%.0f") + "\" y=\"" + fmt(top - 5.0, "%.0f") +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + text + "</text>\n";
  };

  const double total_h = 3 * kTrack + 4 * kGap;
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    fmt(kWidth, "%.0f") + "\" height=\"" + fmt(total_h, "%.0f") + "\">\n";

  double top = kGap;
  svg += "<g id=\"labels\">\n" + title(top, "labels (red) / predictions (blue)");
  if (s.labels) svg += bands(*s.labels, top, kTrack / 2, "#d62728");
  if (s.predictions) svg += bands(*s.predictions, top + kTrack / 2, kTrack / 2, "#1f77b4");
  svg += "</g>\n";

  top += kTrack + kGap;
  const double lo2 = std::min(s.time_score.minCoeff(), s.freq_score.minCoeff());
  const double hi2 = std::max(s.time_score.maxCoeff(), s.freq_score.maxCoeff());
  svg += "<g id=\"components\">\n" + title(top, "time score (orange) / frequency score (green)") +
         polyline(s.time_score, top, lo2, hi2, "#ff7f0e") + polyline(s.freq_score, top, lo2, hi2, "#2ca02c") + "</g>\n";

  top += kTrack + kGap;
  const double lo3 = s.final_score.minCoeff(), hi3 = s.final_score.maxCoeff();
  svg += "<g id=\"final\">\n" + title(top, "final score") + polyline(s.final_score, top, lo3, hi3, "#000000");
  if (s.predictions) {
    double thr = hi3;
    bool any = false;
    for (Eigen::Index i = 0; i < n; ++i)
      if ((*s.predictions)[static_cast<std::size_t>(i)]) {
        thr = std::min(thr, s.final_score(i));
        any = true;
      }
    if (any) {
      const double span = hi3 > lo3 ? hi3 - lo3 : 1.0;
      const double y = top + kTrack - kTrack * (thr - lo3) / span;
      svg += "<line x1=\"" + fmt(kLeft, "%.2f") + "\" y1=\"" + fmt(y, "%.2f") + "\" x2=\"" + fmt(kLeft + plot_w, "%.2f") +
             "\" y2=\"" + fmt(y, "%.2f") + "\" stroke=\"#7f7f7f\" stroke-dasharray=\"4 2\"/>\n";
    }
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void cmd_plot(const PlotOptions& opts) {
  require_file(opts.scores_csv);
  const std::string svg = render_svg(read_score_csv(opts.scores_csv));
  Manifest manifest{"plot", 0};
  manifest.inputs = {{"scores", opts.scores_csv.string()}};
  manifest.outputs = {{"figure", opts.out_svg.string()}};
  Staging staging;
  {
    std::ofstream f(staging.stage(opts.out_svg), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + opts.out_svg.string());
    f << svg;
  }
  manifest.write(staging.stage(manifest_for(opts.out_svg)));
  staging.commit();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CATCH-style multivariate time-series anomaly detection"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string gen_out;
  auto* g = app.add_subcommand("generate", "synthesize a labelled dataset");
  g->add_option("--type", gen.type, "global|contextual|shapelet|seasonal|trend|mixed")->required();
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--out", gen_out, "output directory")->required();

  TrainOptions tr;
  std::string tr_config, tr_data, tr_out, tr_losses;
  auto* t = app.add_subcommand("train", "bi-level training on <data>/train.csv");
  t->add_option("--config", tr_config, "key=value config file");
  t->add_option("--data", tr_data, "dataset directory")->required();
  t->add_option("--out", tr_out, "checkpoint path")->required();
  t->add_option("--losses", tr_losses, "loss history CSV");
  t->add_option("--epochs", tr.epochs, "passes over the training windows");
  t->add_option("--outer-iterations", tr.outer_iterations, "mask steps; overrides --epochs");
  t->add_option("--seed", tr.seed, "random seed");

  ScoreOptions sc;
  std::string sc_ck, sc_data, sc_out;
  auto* s = app.add_subcommand("score", "per-timestamp anomaly scores");
  s->add_option("--checkpoint", sc_ck, "checkpoint path")->required();
  s->add_option("--data", sc_data, "CSV file or dataset directory")->required();
  s->add_option("--out", sc_out, "score CSV path")->required();
  s->add_option("--score-lambda", sc.score_lambda, "weight of the frequency score");
  s->add_option("--inference-patch-size", sc.inference_patch_size, "time-domain patch length");
  s->add_option("--score-mode", sc.score_mode, "point|window")->check(CLI::IsMember({"point", "window"}));
  s->add_option("--threshold-ratio", sc.threshold_ratio, "fraction of points flagged");

  EvalOptions ev;
  std::string ev_in, ev_out;
  auto* e = app.add_subcommand("eval", "metrics from a labelled score CSV");
  e->add_option("--scores", ev_in, "score CSV")->required();
  e->add_option("--out", ev_out, "report path")->required();

  PlotOptions pl;
  std::string pl_in, pl_out;
  auto* p = app.add_subcommand("plot", "SVG figure of a score CSV");
  p->add_option("--scores", pl_in, "score CSV")->required();
  p->add_option("--out", pl_out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*g) {
      gen.out_dir = gen_out;
      cmd_generate(gen);
    } else if (*t) {
      if (!tr_config.empty()) tr.config_path = tr_config;
      if (!tr_losses.empty()) tr.losses_path = tr_losses;
      tr.data_dir = tr_data;
      tr.out_path = tr_out;
      cmd_train(tr);
    } else if (*s) {
      sc.checkpoint = sc_ck;
      sc.data = sc_data;
      sc.out_csv = sc_out;
      cmd_score(sc);
    } else if (*e) {
      ev.scores_csv = ev_in;
      ev.out_path = ev_out;
      cmd_eval(ev, out);
    } else if (*p) {
      pl.scores_csv = pl_in;
      pl.out_svg = pl_out;
      cmd_plot(pl);
    }
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace catchad::cli

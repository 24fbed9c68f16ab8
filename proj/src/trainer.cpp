#include "catchad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace catchad {

void TrainConfig::validate() const {
  if (!(eta_model >= 0.0) || !(eta_mask >= 0.0))
    throw std::invalid_argument("learning rates must be non-negative");
  if (outer_iterations < 0) throw std::invalid_argument("outer_iterations must be >= 0");
  if (inner_iterations < 1) throw std::invalid_argument("inner_iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(epochs >= 0.0)) throw std::invalid_argument("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adam decay rates must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  weights.validate();
}

long resolve_outer_iterations(const TrainConfig& config, std::size_t window_count) {
  if (config.outer_iterations > 0) return config.outer_iterations;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const double batches = static_cast<double>((window_count + bs - 1) / bs);
  return static_cast<long>(
      std::ceil(config.epochs * batches / static_cast<double>(1 + config.inner_iterations)));
}

ParamPartition partition_params(const ModelParams& params) {
  ParamPartition out;
  for (const auto& t : params.tensors())
    (t.group == ParamGroup::Mask ? out.mask : out.model).push_back(t.name);
  return out;
}

ObjectiveValue evaluate_objective(const CatchModel& model, const ModelParams& params,
                                  const Matrix& batch, const LossWeights& weights, bool training,
                                  Rng& rng, ModelParams* grads) {
  const auto& cfg = model.config();
  const auto st = model.forward_batch(batch, params, training, rng);
  const auto n = cfg.channels;
  const auto groups = st.masks.hard.rows() / n;
  const bool want_grad = grads != nullptr;

  ObjectiveValue value;
  OutputGrads og;
  auto& c = value.components;
  c.rec_time = rec_loss_time(st.input, st.recon_time, want_grad ? &og.recon_time : nullptr);
  c.rec_freq = rec_loss_freq(st.spec_real, st.spec_imag, st.recon_real, st.recon_imag,
                             want_grad ? &og.recon_real : nullptr,
                             want_grad ? &og.recon_imag : nullptr);
  if (want_grad) {
    og.recon_time *= weights.rec_time;
    og.recon_real *= weights.rec_freq;
    og.recon_imag *= weights.rec_freq;
    og.masks = Matrix::Zero(st.masks.hard.rows(), n);
    og.raw_scores.resize(st.layers.size());
  }

  // Auxiliary terms are averaged over every (layer, patch, head) trace.
  const double trace_count = static_cast<double>(st.layers.size() * groups * cfg.heads);
  Matrix g_raw, g_mask;
  for (std::size_t k = 0; k < st.layers.size(); ++k) {
    const auto& cache = st.layers[k].attention;
    if (want_grad) og.raw_scores[k].resize(cache.raw_scores.size());
    for (Eigen::Index g = 0; g < groups; ++g) {
      const Matrix mask = st.masks.hard.middleRows(g * n, n);
      for (int h = 0; h < cfg.heads; ++h) {
        const auto idx = static_cast<std::size_t>(g * cfg.heads + h);
        const Matrix& raw = cache.raw_scores[idx];
        Matrix masked = raw;
        for (Eigen::Index i = 0; i < masked.size(); ++i)
          if (!(mask.data()[i] > 0.0)) masked.data()[i] = layers::kMaskedScore;
        c.clustering += clustering_loss(raw, masked, mask, weights.tau,
                                        want_grad ? &g_raw : nullptr,
                                        want_grad ? &g_mask : nullptr) / trace_count;
        if (want_grad) {
          const double scale = weights.clustering / trace_count;
          og.raw_scores[k][idx] = g_raw * scale;
          og.masks.middleRows(g * n, n) += g_mask * scale;
        }
      }
    }
  }
  for (Eigen::Index g = 0; g < groups; ++g) {
    const Matrix mask = st.masks.hard.middleRows(g * n, n);
    c.regular += regular_loss(mask, want_grad ? &g_mask : nullptr) / static_cast<double>(groups);
    if (want_grad) og.masks.middleRows(g * n, n) += g_mask * (weights.regular / static_cast<double>(groups));
  }
  value.total = total_loss(c, weights);
  if (want_grad) model.backward(st, params, og, *grads);
  return value;
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, double beta1, double beta2, double eps)
    : m_(params.zeros_like()), v_(params.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads, ParamGroup group,
                         double lr) {
  long& t = group == ParamGroup::Mask ? t_mask_ : t_model_;
  ++t;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  auto& ps = params.tensors();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].group != group) continue;
    const Matrix& g = grads.tensors()[i].value;
    Matrix& m = m_.tensors()[i].value;
    Matrix& v = v_.tensors()[i].value;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    if (lr == 0.0) continue;
    ps[i].value.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

namespace {

/// Endless seeded shuffle over window indices; reshuffles after each pass.
class BatchStream {
 public:
  BatchStream(std::size_t count, std::uint64_t seed) : order_(count), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t size) {
    std::vector<std::size_t> out;
    out.reserve(size);
    while (out.size() < size) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainResult bilevel_train(const std::vector<TimeWindow>& data, ModelParams params,
                          const ModelConfig& model_config, const TrainConfig& config,
                          const StepObserver& observer) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("bilevel_train: no training windows");
  check_params(params, model_config);
  CatchModel model(model_config);
  const auto n = model_config.channels;
  const auto t = model_config.window;

  std::vector<Matrix> normalized;
  normalized.reserve(data.size());
  for (const auto& w : data) {
    if (w.values.rows() != n || w.values.cols() != t) {
      throw std::invalid_argument("bilevel_train: window of shape " +
                                  std::to_string(w.values.rows()) + "x" +
                                  std::to_string(w.values.cols()) + " does not match N=" +
                                  std::to_string(n) + ", T=" + std::to_string(t));
    }
    normalized.push_back(instance_normalize(w).values);
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch_size =
      std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), data.size());
  BatchStream stream(data.size(), config.seed);
  Rng model_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  AdamOptimizer adam(params, config.beta1, config.beta2, config.adam_eps);
  ModelParams grads = params.zeros_like();
  LossWeights weights = config.weights;

  TrainResult result;
  const long outer = resolve_outer_iterations(config, data.size());
  Matrix batch(static_cast<Eigen::Index>(batch_size) * n, t);
  long step = 0;

  auto run_step = [&](long o, long inner, Phase phase) {
    const auto idx = stream.next(batch_size);
    for (std::size_t b = 0; b < idx.size(); ++b)
      batch.middleRows(static_cast<Eigen::Index>(b) * n, n) = normalized[idx[b]];
    grads.set_zero();
    ObjectiveValue value;
    try {
      value = evaluate_objective(model, params, batch, weights, true, model_rng, &grads);
    } catch (const std::domain_error& e) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) + " (outer " +
                               std::to_string(o) + ", inner " + std::to_string(inner) +
                               "): " + e.what());
    }
    if (!std::isfinite(value.total)) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               ": non-finite total loss");
    }
    if (phase == Phase::Mask)
      adam.step(params, grads, ParamGroup::Mask, config.eta_mask);
    else
      adam.step(params, grads, ParamGroup::Model, config.eta_model);
    StepRecord rec{step, o, inner, phase, value.components, value.total};
    result.report.records.push_back(rec);
    if (observer) observer(rec, params);
    ++step;
  };

  for (long o = 0; o < outer; ++o) {
    run_step(o, 0, Phase::Mask);
    for (long j = 1; j <= config.inner_iterations; ++j) run_step(o, j, Phase::Model);
  }
  result.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.params = std::move(params);
  return result;
}

void write_loss_history(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write loss history: " + path.string());
  out << "step,phase,rec_time,rec_freq,clustering,regular,total\n";
  char buf[256];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof(buf), "%ld,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  r.phase == Phase::Mask ? "mask" : "model", r.losses.rec_time, r.losses.rec_freq,
                  r.losses.clustering, r.losses.regular, r.total);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing loss history: " + path.string());
}

}  // namespace catchad

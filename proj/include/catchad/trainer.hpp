#pragma once

#include "catchad/model.hpp"
#include "catchad/objectives.hpp"
#include "catchad/seriesio.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace catchad {

struct TrainConfig {
  double eta_model = 1e-3;
  double eta_mask = 1e-3;
  long outer_iterations = 0;  // N_O; 0 derives it from `epochs`
  long inner_iterations = 3;  // N_I
  Eigen::Index batch_size = 32;
  double epochs = 1.0;
  std::uint64_t seed = 0;
  LossWeights weights;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// N_O = ceil(epochs * batches_per_epoch / (1 + N_I)) unless set explicitly.
long resolve_outer_iterations(const TrainConfig& config, std::size_t window_count);

enum class Phase { Mask, Model };

struct StepRecord {
  long step = 0;
  long outer = 0;
  long inner = 0;  // 0 for the mask step, 1..N_I for model steps
  Phase phase = Phase::Mask;
  LossComponents losses;
  double total = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> records;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

struct ParamPartition {
  std::vector<std::string> mask;   // theta_mask
  std::vector<std::string> model;  // theta_model
};

ParamPartition partition_params(const ModelParams& params);

struct ObjectiveValue {
  LossComponents components;
  double total = 0.0;
};

/// Forward pass plus all four objectives on one stacked batch. When `grads`
/// is non-null the gradient of the weighted total is accumulated into it.
ObjectiveValue evaluate_objective(const CatchModel& model, const ModelParams& params,
                                  const Matrix& batch, const LossWeights& weights, bool training,
                                  Rng& rng, ModelParams* grads = nullptr);

/// Adaptive-moment update with separate bias-correction clocks per group.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, double beta1, double beta2, double eps);

  /// Updates only the tensors of `group`.
  void step(ModelParams& params, const ModelParams& grads, ParamGroup group, double lr);

 private:
  ModelParams m_, v_;
  double beta1_, beta2_, eps_;
  long t_mask_ = 0;
  long t_model_ = 0;
};

/// Called after every optimizer step with the updated parameters.
using StepObserver = std::function<void(const StepRecord&, const ModelParams&)>;

/// Alternates one mask-generator step with N_I model steps, each on the next
/// mini-batch of a seeded shuffled stream over `data`.
TrainResult bilevel_train(const std::vector<TimeWindow>& data, ModelParams params,
                          const ModelConfig& model_config, const TrainConfig& config,
                          const StepObserver& observer = {});

/// Columns: step, phase, rec_time, rec_freq, clustering, regular, total.
void write_loss_history(const std::filesystem::path& path, const TrainReport& report);

}  // namespace catchad

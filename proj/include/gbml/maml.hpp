#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gbml/models.hpp"
#include "gbml/optim.hpp"
#include "gbml/rng.hpp"
#include "gbml/tasks.hpp"

namespace gbml::maml {

using ad::Tensor;
using models::MlpParams;

/// Regression objectives. HalfSquared is 1/n * sum 1/2 (y - yhat)^2, the
/// form whose gradient at yhat = 0 is exactly -y; Squared drops the 1/2.
enum class LossKind { HalfSquared, Squared };

LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetaConfig {
  double alpha = 0.001;
  std::size_t inner_steps = 5;
  std::size_t meta_batch = 25;
  std::size_t meta_iterations = 10000;
  std::size_t k_shot = 5;
  std::size_t query_size = 10;
  std::uint64_t seed = 0;
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden = {100, 100};
  std::size_t bias_transform_dim = 10;
  std::size_t output_dim = 1;
  double outer_lr = 1e-3;
  LossKind loss = LossKind::HalfSquared;
  /// Drops second-order terms from the meta-gradient. Speed comparisons only.
  bool first_order = false;
  std::size_t log_interval = 100;

  std::vector<std::size_t> layer_sizes() const;
  void validate() const;
};

/// Mean loss of the model on (x, y); x and y are [n x d] tensors.
Tensor loss(const MlpParams& params, const Tensor& x, const Tensor& y, LossKind kind);
/// Plain mean squared error (no 1/2), untaped.
double mse(const MlpParams& params, const Tensor& x, const Tensor& y);

/// Registers every parameter of `params` as a leaf on `tape`.
MlpParams attach(const MlpParams& params, ad::Tape& tape);
MlpParams detach(const MlpParams& params);

/// `steps` full-batch gradient-descent updates on the support loss.
///
/// With `taped`, `params` must already live on a tape and the result stays
/// differentiable with respect to them (the gradients are themselves taped
/// unless `first_order`). Without it, each step runs on a scratch tape and
/// the result is a constant.
MlpParams inner_adapt(const MlpParams& params, const Tensor& support_x, const Tensor& support_y,
                      double alpha, std::size_t steps, bool taped,
                      LossKind kind = LossKind::HalfSquared, bool first_order = false);

/// Mean over tasks of the post-adaptation query loss. Taped when `params` is.
Tensor meta_objective(const MlpParams& params, const std::vector<tasks::Task>& batch,
                      const MetaConfig& cfg);

struct MetaGradient {
  double objective = 0.0;
  optim::ParamList grads;
};

/// Value and gradient of meta_objective, one tape per task; per-task
/// gradients are reduced in task-index order.
MetaGradient meta_gradient(const MlpParams& params, const std::vector<tasks::Task>& batch,
                           const MetaConfig& cfg);

using TaskSampler = std::function<tasks::Task(Rng&)>;

struct LossPoint {
  std::size_t iteration = 0;
  double meta_loss = 0.0;
  double wall_seconds = 0.0;
};

struct MetaTrainResult {
  MlpParams params;
  std::vector<LossPoint> curve;
};

using ProgressFn = std::function<void(const LossPoint&)>;

/// Adam on meta_objective for cfg.meta_iterations. Each curve point is the
/// mean meta-loss over the preceding log_interval iterations.
MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSampler& sampler,
                           const ProgressFn& progress = {});
/// Same, starting from given parameters.
MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSampler& sampler,
                           const MlpParams& initial, const ProgressFn& progress = {});

/// Update rule for fine-tuning. Adaptation inside MAML is always Sgd.
enum class Optimizer { Sgd, Adam };

Optimizer optimizer_from_string(const std::string& s);
std::string to_string(Optimizer o);

struct AdaptTrajectory {
  std::vector<double> support_mse;
  std::vector<double> query_mse;
  std::size_t steps = 0;
};

struct FineTuneResult {
  AdaptTrajectory trajectory;
  MlpParams adapted;
};

/// Full-batch training on the task's support set, recording support and query
/// MSE before the first step and after every step. With Adam, `lr` is the
/// Adam step size and the moments start at zero.
FineTuneResult fine_tune(const MlpParams& params, const tasks::Task& task, double lr,
                         std::size_t max_steps, LossKind kind = LossKind::HalfSquared,
                         Optimizer optimizer = Optimizer::Sgd);

struct ConditionedConfig {
  std::size_t input_dim = 1;
  std::size_t descriptor_dim = 2;
  std::vector<std::size_t> hidden = {100, 100};
  std::size_t iterations = 5000;
  std::size_t tasks_per_batch = 25;
  std::size_t points_per_task = 10;
  double lr = 1e-3;
  /// Step size at the last iteration; the step size moves linearly from lr.
  /// Equal to lr by default (constant step size).
  std::optional<double> lr_final;
  std::uint64_t seed = 0;

  std::vector<std::size_t> layer_sizes() const;
  void validate() const;
};

/// Supervised regression from (x, descriptor) to y, pooled across tasks, Adam.
MlpParams train_conditioned(const ConditionedConfig& cfg, const TaskSampler& sampler);
MlpParams train_conditioned(const ConditionedConfig& cfg, const TaskSampler& sampler,
                            const MlpParams& initial);

/// MSE of a conditioned model on the task's query set, using its true descriptor.
double conditioned_query_mse(const MlpParams& params, const tasks::Task& task);

}  // namespace gbml::maml

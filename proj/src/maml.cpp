#include "gbml/maml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gbml::maml {

LossKind loss_from_string(const std::string& s) {
  if (s == "half_squared" || s == "mse") return LossKind::HalfSquared;
  if (s == "squared") return LossKind::Squared;
  throw std::invalid_argument("unknown loss kind '" + s + "'");
}

std::string to_string(LossKind k) {
  return k == LossKind::HalfSquared ? "half_squared" : "squared";
}

std::vector<std::size_t> MetaConfig::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim + bias_transform_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  return sizes;
}

void MetaConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("meta config: alpha must be > 0");
  if (inner_steps < 1) throw std::invalid_argument("meta config: inner_steps must be >= 1");
  if (meta_batch < 1 || k_shot < 1 || query_size < 1 || input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("meta config: counts must be >= 1");
  }
  if (log_interval < 1) throw std::invalid_argument("meta config: log_interval must be >= 1");
  if (!(outer_lr > 0.0)) throw std::invalid_argument("meta config: outer_lr must be > 0");
}

Tensor loss(const MlpParams& params, const Tensor& x, const Tensor& y, LossKind kind) {
  const Tensor d = models::forward(params, x) - y;
  const Tensor m = ad::mean(d * d);
  return kind == LossKind::HalfSquared ? ad::scale(m, 0.5) : m;
}

double mse(const MlpParams& params, const Tensor& x, const Tensor& y) {
  return loss(detach(params), x.detach(), y.detach(), LossKind::Squared).item();
}

MlpParams attach(const MlpParams& params, ad::Tape& tape) {
  optim::ParamList leaves;
  for (const auto& p : params.flatten()) leaves.push_back(tape.variable(p));
  return params.with_values(leaves);
}

MlpParams detach(const MlpParams& params) {
  optim::ParamList values;
  for (const auto& p : params.flatten()) values.push_back(p.detach());
  return params.with_values(values);
}

namespace {

// Rows sorted lexicographically by (x, y) so the summation order of the
// support loss does not depend on how the support set was listed.
std::pair<Tensor, Tensor> canonical_rows(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) {
    throw ad::ShapeError("support inputs " + ad::to_string(x.shape()) + " and targets " +
                         ad::to_string(y.shape()) + " do not pair up");
  }
  const auto n = x.rows();
  const auto cx = x.cols();
  const auto cy = y.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto xd = x.data();
  const auto yd = y.data();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < cx; ++j) {
      if (xd[a * cx + j] != xd[b * cx + j]) return xd[a * cx + j] < xd[b * cx + j];
    }
    for (std::size_t j = 0; j < cy; ++j) {
      if (yd[a * cy + j] != yd[b * cy + j]) return yd[a * cy + j] < yd[b * cy + j];
    }
    return false;
  });
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (auto r : order) {
    xs.insert(xs.end(), xd.begin() + static_cast<std::ptrdiff_t>(r * cx),
              xd.begin() + static_cast<std::ptrdiff_t>((r + 1) * cx));
    ys.insert(ys.end(), yd.begin() + static_cast<std::ptrdiff_t>(r * cy),
              yd.begin() + static_cast<std::ptrdiff_t>((r + 1) * cy));
  }
  return {Tensor::matrix(n, cx, std::move(xs)), Tensor::matrix(n, cy, std::move(ys))};
}

bool all_taped(const MlpParams& params) {
  for (const auto& p : params.flatten()) {
    if (!p.is_taped()) return false;
  }
  return true;
}

void check_finite(double v, const char* what, std::size_t iteration) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string(what) + " became non-finite (" + std::to_string(v) +
                          ") at iteration " + std::to_string(iteration));
  }
}

}  // namespace

MlpParams inner_adapt(const MlpParams& params, const Tensor& support_x, const Tensor& support_y,
                      double alpha, std::size_t steps, bool taped, LossKind kind,
                      bool first_order) {
  if (support_x.rank() != 2 || support_x.rows() == 0) {
    throw std::invalid_argument("inner_adapt: empty support set");
  }
  if (steps == 0) return params;
  const auto [x, y] = canonical_rows(support_x.detach(), support_y.detach());

  MlpParams current = params;
  if (taped) {
    if (!all_taped(params)) {
      throw ad::TapeError("inner_adapt: taped adaptation needs parameters on a tape");
    }
    for (std::size_t s = 0; s < steps; ++s) {
      const auto flat = current.flatten();
      const auto grads = ad::backward(loss(current, x, y, kind), flat, !first_order);
      current = current.with_values(optim::sgd_step(flat, grads, alpha));
    }
    return current;
  }

  current = detach(params);
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Tape tape;
    const MlpParams leaves = attach(current, tape);
    const auto grads = ad::backward(loss(leaves, x, y, kind), leaves.flatten(), false);
    current = current.with_values(optim::sgd_step(current.flatten(), grads, alpha));
  }
  return current;
}

Tensor meta_objective(const MlpParams& params, const std::vector<tasks::Task>& batch,
                      const MetaConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("meta_objective: empty task batch");
  const bool taped = all_taped(params);
  Tensor total;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto& task = batch[t];
    const MlpParams adapted =
        cfg.inner_steps == 0
            ? params
            : inner_adapt(params, task.support_inputs(), task.support_targets(), cfg.alpha,
                          cfg.inner_steps, taped, cfg.loss, cfg.first_order);
    const Tensor q = loss(adapted, task.query_inputs(), task.query_targets(), cfg.loss);
    total = t == 0 ? q : total + q;
  }
  return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
}

MetaGradient meta_gradient(const MlpParams& params, const std::vector<tasks::Task>& batch,
                           const MetaConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("meta_gradient: empty task batch");
  const MlpParams base = detach(params);
  MetaGradient out;
  std::vector<std::vector<double>> acc;
  for (const auto& p : base.flatten()) acc.emplace_back(p.size(), 0.0);

  for (const auto& task : batch) {
    ad::Tape tape;
    const MlpParams leaves = attach(base, tape);
    const MlpParams adapted =
        cfg.inner_steps == 0
            ? leaves
            : inner_adapt(leaves, task.support_inputs(), task.support_targets(), cfg.alpha,
                          cfg.inner_steps, true, cfg.loss, cfg.first_order);
    const Tensor q = loss(adapted, task.query_inputs(), task.query_targets(), cfg.loss);
    const auto grads = ad::backward(q, leaves.flatten(), false);
    out.objective += q.item();
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const auto g = grads[i].data();
      for (std::size_t k = 0; k < g.size(); ++k) acc[i][k] += g[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.objective *= inv;
  const auto shapes = base.flatten();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (auto& v : acc[i]) v *= inv;
    out.grads.emplace_back(shapes[i].shape(), std::move(acc[i]));
  }
  return out;
}

MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSampler& sampler,
                           const ProgressFn& progress) {
  cfg.validate();
  Rng init_rng(cfg.seed, 0);
  return meta_train(cfg, sampler, models::init_mlp(cfg.layer_sizes(), cfg.bias_transform_dim, init_rng),
                    progress);
}

MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSampler& sampler,
                           const MlpParams& initial, const ProgressFn& progress) {
  cfg.validate();
  MetaTrainResult result{detach(initial), {}};
  Rng task_rng(cfg.seed, 1);
  auto state = optim::AdamState::init(result.params.flatten(), {.lr = cfg.outer_lr});
  const auto start = std::chrono::steady_clock::now();
  double window = 0.0;
  std::vector<tasks::Task> batch(cfg.meta_batch);

  for (std::size_t it = 0; it < cfg.meta_iterations; ++it) {
    for (auto& t : batch) t = sampler(task_rng);
    const auto mg = meta_gradient(result.params, batch, cfg);
    check_finite(mg.objective, "meta-loss", it);
    auto step = optim::adam_step(state, result.params.flatten(), mg.grads);
    state = std::move(step.state);
    result.params = result.params.with_values(step.params);
    window += mg.objective;
    if ((it + 1) % cfg.log_interval == 0) {
      LossPoint p;
      p.iteration = it + 1;
      p.meta_loss = window / static_cast<double>(cfg.log_interval);
      p.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.curve.push_back(p);
      if (progress) progress(p);
      window = 0.0;
    }
  }
  return result;
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adam") return Optimizer::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

std::string to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adam"; }

FineTuneResult fine_tune(const MlpParams& params, const tasks::Task& task, double lr,
                         std::size_t max_steps, LossKind kind, Optimizer optimizer) {
  if (max_steps < 1) throw std::invalid_argument("fine_tune: max_steps must be >= 1");
  const Tensor sx = task.support_inputs();
  const Tensor sy = task.support_targets();
  const Tensor qx = task.query_inputs();
  const Tensor qy = task.query_targets();
  FineTuneResult r{{}, detach(params)};
  r.trajectory.steps = max_steps;
  auto record = [&] {
    r.trajectory.support_mse.push_back(mse(r.adapted, sx, sy));
    r.trajectory.query_mse.push_back(mse(r.adapted, qx, qy));
  };
  record();
  if (optimizer == Optimizer::Sgd) {
    for (std::size_t s = 0; s < max_steps; ++s) {
      r.adapted = inner_adapt(r.adapted, sx, sy, lr, 1, false, kind);
      record();
    }
    return r;
  }
  const auto [x, y] = canonical_rows(sx, sy);
  auto state = optim::AdamState::init(r.adapted.flatten(), {.lr = lr});
  for (std::size_t s = 0; s < max_steps; ++s) {
    ad::Tape tape;
    const MlpParams leaves = attach(r.adapted, tape);
    const auto grads = ad::backward(loss(leaves, x, y, kind), leaves.flatten(), false);
    auto step = optim::adam_step(state, r.adapted.flatten(), grads);
    state = std::move(step.state);
    r.adapted = r.adapted.with_values(step.params);
    record();
  }
  return r;
}

std::vector<std::size_t> ConditionedConfig::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim + descriptor_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void ConditionedConfig::validate() const {
  if (tasks_per_batch < 1 || points_per_task < 1 || input_dim < 1) {
    throw std::invalid_argument("conditioned config: counts must be >= 1");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("conditioned config: lr must be > 0");
  if (lr_final && !(*lr_final >= 0.0)) {
    throw std::invalid_argument("conditioned config: lr_final must be >= 0");
  }
}

namespace {

// (x, descriptor) rows and their labels for a batch of tasks.
std::pair<Tensor, Tensor> pooled_batch(const std::vector<tasks::Task>& batch,
                                       std::size_t points_per_task) {
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t rows = 0;
  std::size_t width = 0;
  for (const auto& t : batch) {
    width = 1 + t.descriptor.size();
    std::size_t taken = 0;
    auto take = [&](const std::vector<double>& px, const std::vector<double>& py) {
      for (std::size_t i = 0; i < px.size() && taken < points_per_task; ++i, ++taken) {
        xs.push_back(px[i]);
        xs.insert(xs.end(), t.descriptor.begin(), t.descriptor.end());
        ys.push_back(py[i]);
        ++rows;
      }
    };
    take(t.query_x, t.query_y);
    take(t.support_x, t.support_y);
  }
  return {Tensor::matrix(rows, width, std::move(xs)), Tensor::matrix(rows, 1, std::move(ys))};
}

}  // namespace

MlpParams train_conditioned(const ConditionedConfig& cfg, const TaskSampler& sampler) {
  cfg.validate();
  Rng init_rng(cfg.seed, 0);
  return train_conditioned(cfg, sampler, models::init_mlp(cfg.layer_sizes(), 0, init_rng));
}

MlpParams train_conditioned(const ConditionedConfig& cfg, const TaskSampler& sampler,
                            const MlpParams& initial) {
  cfg.validate();
  MlpParams params = detach(initial);
  if (params.input_dim != cfg.input_dim + cfg.descriptor_dim) {
    throw ad::ShapeError("train_conditioned: model input does not match x + descriptor");
  }
  Rng task_rng(cfg.seed, 1);
  auto state = optim::AdamState::init(params.flatten(), {.lr = cfg.lr});
  std::vector<tasks::Task> batch(cfg.tasks_per_batch);
  const double lr_end = cfg.lr_final.value_or(cfg.lr);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double frac =
        cfg.iterations > 1 ? static_cast<double>(it) / static_cast<double>(cfg.iterations - 1) : 0.0;
    state.hyper.lr = cfg.lr + (lr_end - cfg.lr) * frac;
    for (auto& t : batch) t = sampler(task_rng);
    const auto [x, y] = pooled_batch(batch, cfg.points_per_task);
    ad::Tape tape;
    const MlpParams leaves = attach(params, tape);
    const Tensor l = loss(leaves, x, y, LossKind::Squared);
    check_finite(l.item(), "conditioned loss", it);
    const auto grads = ad::backward(l, leaves.flatten(), false);
    auto step = optim::adam_step(state, params.flatten(), grads);
    state = std::move(step.state);
    params = params.with_values(step.params);
  }
  return params;
}

double conditioned_query_mse(const MlpParams& params, const tasks::Task& task) {
  const Tensor pred = models::forward_conditioned(detach(params), task.query_inputs(),
                                                  task.descriptor);
  const Tensor d = pred - task.query_targets();
  return ad::mean(d * d).item();
}

}  // namespace gbml::maml

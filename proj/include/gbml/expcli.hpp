#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbml/config.hpp"
#include "gbml/maml.hpp"
#include "gbml/tasks.hpp"
#include "gbml/universality.hpp"

namespace gbml::expcli {

// ---------------------------------------------------------------------------
// Statistics

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  /// Half-width of the Student-t 95% interval; absent below two samples.
  std::optional<double> ci95;
};

Summary summarize(std::span<const double> values);

// ---------------------------------------------------------------------------
// CSV output

/// Writes `# config: <snapshot>`, a header row, then data rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& config_snapshot,
            std::vector<std::string> columns);

  void row(const std::vector<std::string>& cells);

  static std::string num(double v);
  static std::string num(std::optional<double> v);

 private:
  std::ofstream os_;
  std::size_t width_;
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Settings built from a Config

universality::ConstructionOptions construction_options(const Config& cfg);
maml::MetaConfig sinusoid_meta_config(const Config& cfg);
/// Training ranges: support size maml.k_shot, query size maml.query_size.
tasks::TaskRanges sinusoid_train_ranges(const Config& cfg);
/// Evaluation ranges: query size eval.query_size.
tasks::TaskRanges sinusoid_eval_ranges(const Config& cfg);
std::filesystem::path output_dir(const Config& cfg);
std::filesystem::path checkpoint_path(const Config& cfg);

// ---------------------------------------------------------------------------
// Experiments

/// Test task i is drawn from its own stream (seed, 1000 + i), so every
/// range set sees the same underlying uniforms.
std::vector<tasks::Task> sinusoid_test_tasks(const tasks::TaskRanges& ranges, std::size_t count,
                                             std::uint64_t seed);
std::vector<tasks::Task> polynomial_test_tasks(const tasks::PolynomialRanges& ranges,
                                               std::size_t count, std::uint64_t seed);

struct CurveSummary {
  std::vector<Summary> support;
  std::vector<Summary> query;
};

/// Per-step support and query MSE statistics of fine_tune over the tasks.
CurveSummary finetune_curves(const models::MlpParams& params, std::span<const tasks::Task> tasks,
                             double lr, std::size_t steps, maml::LossKind loss,
                             maml::Optimizer optimizer = maml::Optimizer::Sgd);

struct OodPoint {
  double grid_value = 0.0;
  tasks::TaskRanges ranges;
  Summary pre;
  Summary post;
};

std::vector<OodPoint> ood_evaluate(const models::MlpParams& params, tasks::SweepAxis axis,
                                   const std::vector<double>& grid, const tasks::TaskRanges& base,
                                   std::size_t trials, std::uint64_t seed, double alpha,
                                   std::size_t steps, maml::LossKind loss);

struct DepthSettings {
  std::vector<std::size_t> depths{1, 2, 3, 4, 5};
  std::size_t seeds = 3;
  std::size_t target_params = 40000;
  double alpha = 0.001;
  std::size_t meta_iterations = 2500;
  std::size_t meta_batch = 10;
  std::size_t k_shot = 40;
  std::size_t query_size = 40;
  double outer_lr = 0.001;
  std::size_t oracle_iterations = 5000;
  double oracle_lr = 0.01;
  double oracle_lr_final = 0.0;
  std::size_t oracle_batch = 25;
  std::size_t oracle_points = 20;
  std::size_t eval_tasks = 50;
  std::uint64_t seed = 0;
};

DepthSettings depth_settings(const Config& cfg);

struct DepthRecord {
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t parameters = 0;
  std::uint64_t seed = 0;
  std::string method;
  double mse = 0.0;
  double wall_seconds = 0.0;
};

/// Mean post-adaptation (MAML) or conditioned (oracle) query MSE on the
/// shared polynomial test tasks, one record per depth, seed and method.
std::vector<DepthRecord> depth_sweep(const DepthSettings& s, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit status.

int cmd_certify(const Config& cfg, std::ostream& log);
int cmd_train_sinusoid(const Config& cfg, std::ostream& log);
int cmd_finetune(const Config& cfg, std::ostream& log);
int cmd_ood_sweep(const Config& cfg, std::ostream& log);
int cmd_depth_sweep(const Config& cfg, std::ostream& log);
int cmd_dump_tasks(const Config& cfg, std::ostream& log);

}  // namespace gbml::expcli

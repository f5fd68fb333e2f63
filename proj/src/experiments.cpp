#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "gbml/expcli.hpp"

namespace gbml::expcli {

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  const boost::math::students_t dist(static_cast<double>(s.n - 1));
  s.ci95 = boost::math::quantile(dist, 0.975) * s.stddev / std::sqrt(static_cast<double>(s.n));
  return s;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& config_snapshot,
                     std::vector<std::string> columns)
    : os_(path), width_(columns.size()), path_(path) {
  if (!os_) throw std::runtime_error("cannot write " + path.string());
  os_ << "# config: " << config_snapshot << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
  os_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw std::logic_error(path_.string() + ": row has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
  if (!os_) throw std::runtime_error("failed writing " + path_.string());
}

std::string CsvWriter::num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string CsvWriter::num(std::optional<double> v) { return v ? num(*v) : std::string(); }

// ---------------------------------------------------------------------------

universality::ConstructionOptions construction_options(const Config& cfg) {
  universality::ConstructionOptions o;
  o.bins = cfg.count("cert.bins");
  o.label_dim = cfg.count("cert.label_dim");
  o.epsilon = cfg.number("cert.epsilon");
  o.alpha = cfg.number("cert.alpha");
  o.domain_lo = cfg.number("cert.domain_lo");
  o.domain_hi = cfg.number("cert.domain_hi");
  o.kernel = universality::kernel_form_from_string(cfg.raw("cert.kernel"));
  o.selector_offset = cfg.count("cert.selector_offset");
  return o;
}

maml::MetaConfig sinusoid_meta_config(const Config& cfg) {
  maml::MetaConfig m;
  m.alpha = cfg.number("maml.alpha");
  m.inner_steps = cfg.count("maml.inner_steps");
  m.meta_batch = cfg.count("maml.meta_batch");
  m.meta_iterations = cfg.count("maml.meta_iterations");
  m.k_shot = cfg.count("maml.k_shot");
  m.query_size = cfg.count("maml.query_size");
  m.seed = cfg.seed();
  m.hidden = cfg.counts("maml.hidden");
  m.bias_transform_dim = cfg.count("maml.bias_transform_dim");
  m.outer_lr = cfg.number("maml.outer_lr");
  m.loss = maml::loss_from_string(cfg.raw("maml.loss"));
  m.first_order = cfg.flag("maml.first_order");
  m.log_interval = cfg.count("maml.log_interval");
  m.validate();
  return m;
}

namespace {

tasks::TaskRanges sinusoid_ranges(const Config& cfg) {
  tasks::TaskRanges r;
  r.amplitude = {cfg.number("sinusoid.amp_lo"), cfg.number("sinusoid.amp_hi")};
  r.phase = {cfg.number("sinusoid.phase_lo"), cfg.number("sinusoid.phase_hi")};
  r.input = {cfg.number("sinusoid.input_lo"), cfg.number("sinusoid.input_hi")};
  r.k_shot = cfg.count("maml.k_shot");
  r.validate();
  return r;
}

}  // namespace

tasks::TaskRanges sinusoid_train_ranges(const Config& cfg) {
  auto r = sinusoid_ranges(cfg);
  r.query_size = cfg.count("maml.query_size");
  return r;
}

tasks::TaskRanges sinusoid_eval_ranges(const Config& cfg) {
  auto r = sinusoid_ranges(cfg);
  r.query_size = cfg.count("eval.query_size");
  return r;
}

std::filesystem::path output_dir(const Config& cfg) { return cfg.raw("out"); }

std::filesystem::path checkpoint_path(const Config& cfg) {
  const auto& explicit_path = cfg.raw("checkpoint");
  if (!explicit_path.empty()) return explicit_path;
  return output_dir(cfg) / "sinusoid_maml.ckpt";
}

// ---------------------------------------------------------------------------

std::vector<tasks::Task> sinusoid_test_tasks(const tasks::TaskRanges& ranges, std::size_t count,
                                             std::uint64_t seed) {
  std::vector<tasks::Task> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, 1000 + i);
    out.push_back(tasks::sample_sinusoid(rng, ranges));
  }
  return out;
}

std::vector<tasks::Task> polynomial_test_tasks(const tasks::PolynomialRanges& ranges,
                                               std::size_t count, std::uint64_t seed) {
  std::vector<tasks::Task> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, 1000 + i);
    out.push_back(tasks::sample_polynomial(rng, ranges));
  }
  return out;
}

CurveSummary finetune_curves(const models::MlpParams& params, std::span<const tasks::Task> tasks,
                             double lr, std::size_t steps, maml::LossKind loss,
                             maml::Optimizer optimizer) {
  std::vector<std::vector<double>> support(steps + 1);
  std::vector<std::vector<double>> query(steps + 1);
  for (const auto& t : tasks) {
    const auto r = maml::fine_tune(params, t, lr, steps, loss, optimizer);
    for (std::size_t s = 0; s <= steps; ++s) {
      support[s].push_back(r.trajectory.support_mse[s]);
      query[s].push_back(r.trajectory.query_mse[s]);
    }
  }
  CurveSummary out;
  for (std::size_t s = 0; s <= steps; ++s) {
    out.support.push_back(summarize(support[s]));
    out.query.push_back(summarize(query[s]));
  }
  return out;
}

std::vector<OodPoint> ood_evaluate(const models::MlpParams& params, tasks::SweepAxis axis,
                                   const std::vector<double>& grid, const tasks::TaskRanges& base,
                                   std::size_t trials, std::uint64_t seed, double alpha,
                                   std::size_t steps, maml::LossKind loss) {
  std::vector<OodPoint> out;
  const auto ranges = tasks::ood_sweep(tasks::Family::Sinusoid, axis, grid, base);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> pre;
    std::vector<double> post;
    for (const auto& t : sinusoid_test_tasks(ranges[g], trials, seed)) {
      const auto r = maml::fine_tune(params, t, alpha, steps, loss);
      pre.push_back(r.trajectory.query_mse.front());
      post.push_back(r.trajectory.query_mse.back());
    }
    out.push_back({grid[g], ranges[g], summarize(pre), summarize(post)});
  }
  return out;
}

DepthSettings depth_settings(const Config& cfg) {
  DepthSettings s;
  s.depths = cfg.counts("depth.depths");
  s.seeds = cfg.count("depth.seeds");
  s.target_params = cfg.count("depth.target_params");
  s.alpha = cfg.number("depth.alpha");
  s.meta_iterations = cfg.count("depth.meta_iterations");
  s.meta_batch = cfg.count("depth.meta_batch");
  s.k_shot = cfg.count("depth.k_shot");
  s.query_size = cfg.count("depth.query_size");
  s.outer_lr = cfg.number("depth.outer_lr");
  s.oracle_iterations = cfg.count("depth.oracle_iterations");
  s.oracle_lr = cfg.number("depth.oracle_lr");
  s.oracle_lr_final = cfg.number("depth.oracle_lr_final");
  s.oracle_batch = cfg.count("depth.oracle_batch");
  s.oracle_points = cfg.count("depth.oracle_points");
  s.eval_tasks = cfg.count("depth.eval_tasks");
  s.seed = cfg.seed();
  return s;
}

std::vector<DepthRecord> depth_sweep(const DepthSettings& s, std::ostream* log) {
  tasks::PolynomialRanges train_ranges;
  train_ranges.k_shot = s.k_shot;
  train_ranges.query_size = s.query_size;
  tasks::PolynomialRanges test_ranges;
  test_ranges.k_shot = s.k_shot;
  const auto test = polynomial_test_tasks(test_ranges, s.eval_tasks, s.seed);
  const maml::TaskSampler sampler = [train_ranges](Rng& rng) {
    return tasks::sample_polynomial(rng, train_ranges);
  };

  std::vector<DepthRecord> out;
  for (std::size_t depth : s.depths) {
    const auto width = models::depth_budget(s.target_params, depth);
    const std::vector<std::size_t> hidden(depth, width);
    for (std::size_t k = 0; k < s.seeds; ++k) {
      const std::uint64_t run_seed = s.seed * 1000 + k;

      auto start = std::chrono::steady_clock::now();
      maml::MetaConfig m;
      m.alpha = s.alpha;
      m.inner_steps = 1;
      m.meta_batch = s.meta_batch;
      m.meta_iterations = s.meta_iterations;
      m.k_shot = s.k_shot;
      m.query_size = s.query_size;
      m.seed = run_seed;
      m.hidden = hidden;
      m.outer_lr = s.outer_lr;
      m.log_interval = std::max<std::size_t>(1, s.meta_iterations);
      const auto trained = maml::meta_train(m, sampler).params;
      double total = 0.0;
      for (const auto& t : test) {
        total += maml::fine_tune(trained, t, s.alpha, 1, m.loss).trajectory.query_mse.back();
      }
      DepthRecord r{depth, width, trained.parameter_count(), run_seed, "maml",
                    total / static_cast<double>(test.size()),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      if (log) *log << "depth " << depth << " seed " << run_seed << " maml mse " << r.mse << " ("
                    << r.wall_seconds << " s)" << std::endl;
      out.push_back(r);

      start = std::chrono::steady_clock::now();
      maml::ConditionedConfig oc;
      oc.descriptor_dim = 4;
      oc.hidden = hidden;
      oc.iterations = s.oracle_iterations;
      oc.tasks_per_batch = s.oracle_batch;
      oc.points_per_task = s.oracle_points;
      oc.lr = s.oracle_lr;
      oc.lr_final = s.oracle_lr_final;
      oc.seed = run_seed;
      const auto oracle = maml::train_conditioned(oc, sampler);
      total = 0.0;
      for (const auto& t : test) total += maml::conditioned_query_mse(oracle, t);
      DepthRecord o{depth, width, oracle.parameter_count(), run_seed, "oracle",
                    total / static_cast<double>(test.size()),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      if (log) *log << "depth " << depth << " seed " << run_seed << " oracle mse " << o.mse << " ("
                    << o.wall_seconds << " s)" << std::endl;
      out.push_back(o);
    }
  }
  return out;
}

}  // namespace gbml::expcli

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 125).

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gbml/expcli.hpp"

using namespace gbml;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kEndToEndMaxError = 1e-3;
constexpr double kEndToEndSeconds = 60;
constexpr double kSecondOrderSeconds = 10;
constexpr double kFastSeconds = 1;
constexpr double kNonnegSeconds = 10;
constexpr double kFirstOrderRelErr = 1e-5;
constexpr double kSecondOrderRelErr = 1e-3;
constexpr double kAutodiffSeconds = 30;
constexpr std::size_t kAutodiffCases = 50;
constexpr double kSinusoidMaxMse = 1.0;
constexpr double kSinusoidMinGain = 3.0;
constexpr double kExtraStepsSlack = 0.05;
constexpr double kSinusoidSeconds = 1800;
constexpr double kResilienceRatio = 1.5;
constexpr double kScratchSupportMse = 1e-2;
constexpr double kScratchQueryFactor = 5.0;
constexpr std::size_t kResilienceTasks = 20;
constexpr double kResilienceSeconds = 120;
constexpr double kOracleRelativeSpread = 0.2;
constexpr double kDepthSeconds = 3600 * 1.1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

// -------------------------------------------------------------------------
// CSV reading

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::runtime_error("missing column " + name);
    return static_cast<std::size_t>(it - columns.begin());
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
  const std::string& str(std::size_t row, const std::string& name) const { return rows[row][col(name)]; }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("# config: ", 0) != 0) throw std::runtime_error(path.string() + ": missing config header");
  Table t;
  std::getline(is, line);
  t.columns = split_csv(line);
  while (std::getline(is, line)) {
    if (!line.empty()) t.rows.push_back(split_csv(line));
  }
  return t;
}

// -------------------------------------------------------------------------
// Criteria

Outcome all_pass(const std::vector<universality::Certificate>& certs, double seconds, double budget) {
  Outcome o{seconds <= budget, ""};
  for (const auto& c : certs) {
    if (!c.pass) {
      o.pass = false;
      o.detail += c.id + " failed (measured " + fmt(c.measured) + (c.note.empty() ? "" : ", " + c.note) + "); ";
    }
  }
  o.detail += std::to_string(certs.size()) + " checks, " + fmt(seconds) + " s";
  return o;
}

universality::ConstructionOptions construction() {
  universality::ConstructionOptions o;
  o.bins = 5;
  o.label_dim = 1;
  o.epsilon = 1e-6;
  o.alpha = 1e-3;
  return o;
}

Outcome end_to_end() {
  const auto start = Clock::now();
  const auto c = universality::build_construction(construction());
  Rng rng(0, 10);
  const auto table = universality::random_table(c.bins, universality::default_label_grid(), rng);
  const auto cert = universality::certify_end_to_end(c, table);
  const double s = seconds_since(start);
  return {cert.pass && cert.measured <= kEndToEndMaxError && s < kEndToEndSeconds,
          "max grid error " + fmt(cert.measured) + ", " + fmt(s) + " s"};
}

Outcome second_order() {
  const auto start = Clock::now();
  const std::vector<double> alphas{1e-2, 1e-3, 1e-4};
  const auto cert = universality::certify_second_order(construction(), alphas, 20, 0);
  const double s = seconds_since(start);
  return {cert.pass && s < kSecondOrderSeconds,
          "ratio spread " + fmt(cert.measured) + (cert.note.empty() ? "" : " (" + cert.note + ")") + ", " +
              fmt(s) + " s"};
}

Outcome kernel() {
  const auto start = Clock::now();
  const auto c = universality::build_construction(construction());
  const auto cert = universality::certify_kernel(c);
  const double s = seconds_since(start);
  return {cert.pass && cert.measured <= 10 * c.epsilon && s < kFastSeconds,
          "max |k - indicator| " + fmt(cert.measured) + " over " + std::to_string(c.bins * c.bins) + " pairs, " +
              fmt(s) + " s"};
}

Outcome telescoping() {
  const auto start = Clock::now();
  std::vector<universality::Certificate> certs;
  std::size_t longest = 0;
  for (std::size_t b = 1; b <= 5; ++b) {
    auto o = construction();
    o.bins = b;
    const auto c = universality::build_construction(o);
    longest = std::max(longest, c.chain_length);
    certs.push_back(universality::certify_telescoping(c));
  }
  auto o = all_pass(certs, seconds_since(start), kFastSeconds);
  o.detail = "chains up to N=" + std::to_string(longest) + ", " + o.detail;
  return o;
}

Outcome loss_gradients() {
  const auto start = Clock::now();
  const auto certs = universality::certify_loss_gradients(0);
  return all_pass(certs, seconds_since(start), kFastSeconds);
}

Outcome kshot() {
  const auto start = Clock::now();
  const auto certs = universality::certify_kshot(universality::build_construction(construction()), 0);
  return all_pass(certs, seconds_since(start), kFastSeconds);
}

Outcome nonnegativity() {
  const auto start = Clock::now();
  const auto certs = universality::check_nonneg(universality::build_construction(construction()), 1000, 0);
  return all_pass(certs, seconds_since(start), kNonnegSeconds);
}

// Random small MLP and tasks whose ReLU inputs stay clear of zero.
struct AutodiffCase {
  models::MlpParams params;
  maml::MetaConfig cfg;
  std::vector<tasks::Task> batch;
};

AutodiffCase autodiff_case(std::size_t index) {
  Rng rng(8, index);
  for (;;) {
    AutodiffCase c;
    c.cfg.hidden.assign(1 + rng.index(2), 0);
    for (auto& h : c.cfg.hidden) h = 3 + rng.index(6);
    c.cfg.bias_transform_dim = rng.index(4);
    c.cfg.alpha = rng.uniform(0.01, 0.1);
    c.cfg.inner_steps = 1 + rng.index(2);
    c.cfg.k_shot = 3 + rng.index(4);
    c.cfg.query_size = 4;
    c.params = models::init_mlp(c.cfg.layer_sizes(), c.cfg.bias_transform_dim, rng);
    auto ranges = tasks::sinusoid_in_distribution();
    ranges.k_shot = c.cfg.k_shot;
    ranges.query_size = c.cfg.query_size;
    for (int t = 0; t < 2; ++t) c.batch.push_back(tasks::sample_sinusoid(rng, ranges));
    bool clear = true;
    for (const auto& t : c.batch) {
      clear = clear && models::min_abs_preactivation(c.params, t.support_inputs()) > 1e-2 &&
              models::min_abs_preactivation(c.params, t.query_inputs()) > 1e-2;
    }
    if (clear) return c;
  }
}

Outcome autodiff() {
  const auto start = Clock::now();
  double worst_first = 0.0, worst_second = 0.0;
  for (std::size_t k = 0; k < kAutodiffCases; ++k) {
    const auto c = autodiff_case(k);
    const auto& task = c.batch.front();
    const auto flat = c.params.flatten();

    ad::Tape tape;
    const auto leaves = maml::attach(c.params, tape);
    const auto loss =
        maml::loss(leaves, task.support_inputs(), task.support_targets(), maml::LossKind::HalfSquared);
    const auto grads = ad::backward(loss, leaves.flatten());
    const auto mg = maml::meta_gradient(c.params, c.batch, c.cfg);

    for (std::size_t i = 0; i < flat.size(); ++i) {
      auto with = [&](const ad::Tensor& v) {
        auto q = flat;
        q[i] = v;
        return c.params.with_values(q);
      };
      const auto fd1 = ad::finite_diff(
          [&](const ad::Tensor& v) {
            return maml::loss(with(v), task.support_inputs(), task.support_targets(), maml::LossKind::HalfSquared)
                .item();
          },
          flat[i], 1e-6);
      worst_first = std::max(worst_first, ad::relative_error(grads[i], fd1, 1e-8));
      const auto fd2 = ad::finite_diff(
          [&](const ad::Tensor& v) { return maml::meta_objective(with(v), c.batch, c.cfg).item(); }, flat[i], 1e-5);
      worst_second = std::max(worst_second, ad::relative_error(mg.grads[i], fd2, 1e-8));
    }
  }
  const double s = seconds_since(start);
  return {worst_first <= kFirstOrderRelErr && worst_second <= kSecondOrderRelErr && s < kAutodiffSeconds,
          std::to_string(kAutodiffCases) + " cases, worst first-order " + fmt(worst_first) + ", worst meta-gradient " +
              fmt(worst_second) + ", " + fmt(s) + " s"};
}

// -------------------------------------------------------------------------

class Run {
 public:
  explicit Run(fs::path out) : out_(std::move(out)) {
    fs::create_directories(out_);
    cfg_.set("out", out_.string());
  }

  Outcome sinusoid() {
    auto cfg = cfg_;
    cfg.set("eval.steps", "10");
    cfg.set("trials", "100");
    const auto start = Clock::now();
    std::ofstream log(out_ / "train.log");
    expcli::cmd_train_sinusoid(cfg, log);
    const double s = seconds_since(start);
    const auto t = read_csv(out_ / "sinusoid_eval.csv");
    const double pre = t.num(0, "query_mse_mean"), five = t.num(5, "query_mse_mean"),
                 ten = t.num(10, "query_mse_mean");
    return {five < kSinusoidMaxMse && pre >= kSinusoidMinGain * five && ten <= five + kExtraStepsSlack &&
                s <= kSinusoidSeconds,
            "query mse pre " + fmt(pre) + ", 5 steps " + fmt(five) + ", 10 steps " + fmt(ten) + ", " + fmt(s) +
                " s"};
  }

  Outcome resilience() {
    ensure_checkpoint();
    auto cfg = cfg_;
    cfg.set("trials", std::to_string(kResilienceTasks));
    cfg.set("finetune.max_steps", "100");
    const auto start = Clock::now();
    std::ostringstream log;
    expcli::cmd_finetune(cfg, log);
    const double s = seconds_since(start);
    const auto t = read_csv(out_ / "finetune.csv");
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) rows[t.str(r, "method")].push_back(r);
    const auto& m = rows.at("maml");
    const auto& sc = rows.at("scratch");
    double best = INFINITY;
    for (std::size_t k = 1; k < m.size(); ++k) best = std::min(best, t.num(m[k], "query_mse_mean"));
    const double maml_last = t.num(m.back(), "query_mse_mean");
    const double scratch_support = t.num(sc.back(), "support_mse_mean");
    const double scratch_query = t.num(sc.back(), "query_mse_mean");
    return {m.size() == 101 && maml_last <= kResilienceRatio * best && scratch_support < kScratchSupportMse &&
                scratch_query >= kScratchQueryFactor * maml_last && s <= kResilienceSeconds,
            "maml query " + fmt(maml_last) + " (best " + fmt(best) + "), scratch support " + fmt(scratch_support) +
                " query " + fmt(scratch_query) + ", " + fmt(s) + " s"};
  }

  Outcome depth() {
    const auto start = Clock::now();
    std::ofstream log(out_ / "depth.log");
    expcli::cmd_depth_sweep(cfg_, log);
    const double s = seconds_since(start);
    const auto t = read_csv(out_ / "depth_summary.csv");
    std::map<std::pair<std::string, std::size_t>, double> mean;
    std::size_t runs = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      mean[{t.str(r, "method"), static_cast<std::size_t>(t.num(r, "depth"))}] = t.num(r, "mse_mean");
      runs += static_cast<std::size_t>(t.num(r, "runs"));
    }
    double lo = INFINITY, hi = 0.0;
    std::string oracle;
    for (std::size_t d = 1; d <= 5; ++d) {
      const double v = mean.at({"oracle", d});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      oracle += (d > 1 ? " " : "") + fmt(v);
    }
    const double spread = (hi - lo) / lo;
    const double d1 = mean.at({"maml", 1}), d3 = mean.at({"maml", 3});
    return {runs == 30 && d3 < d1 && spread < kOracleRelativeSpread && s <= kDepthSeconds,
            "maml depth 1 " + fmt(d1) + " vs depth 3 " + fmt(d3) + "; oracle by depth " + oracle +
                " (spread " + fmt(spread) + "); " + fmt(s) + " s"};
  }

  Outcome ood() {
    ensure_checkpoint();
    auto cfg = cfg_;
    cfg.set("ood.axis", "amplitude");
    cfg.set("trials", "100");
    std::ostringstream log;
    expcli::cmd_ood_sweep(cfg, log);
    const auto t = read_csv(out_ / "ood_amplitude.csv");
    std::vector<double> x, y;
    bool ci = true;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.str(r, "method") != "maml") continue;
      x.push_back(t.num(r, "grid_value"));
      y.push_back(t.num(r, "mse_mean"));
      ci = ci && !t.str(r, "mse_ci").empty() && t.num(r, "trials") == 100;
    }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    bool finite = !x.empty();
    for (std::size_t i = 0; i < x.size(); ++i) {
      finite = finite && std::isfinite(y[i]);
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    std::string series;
    for (std::size_t i = 0; i < y.size(); ++i) series += (i ? " " : "") + fmt(y[i]);
    return {finite && ci && x.size() >= 2 && x.front() == 5 && x.back() == 10 && slope > 0 && y.back() > y.front(),
            "post-adaptation mse along amplitude 5..10: " + series + " (slope " + fmt(slope) + ")"};
  }

 private:
  void ensure_checkpoint() {
    if (fs::exists(expcli::checkpoint_path(cfg_))) return;
    std::ofstream log(out_ / "train.log");
    expcli::cmd_train_sinusoid(cfg_, log);
  }

  fs::path out_;
  expcli::Config cfg_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "output directory for experiment artifacts");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Run run(out);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"universality end-to-end", end_to_end},
      {"closed-form zbar residue scales as alpha^2", second_order},
      {"indicator kernel", kernel},
      {"telescoping products", telescoping},
      {"loss gradients at zero and counterexamples", loss_gradients},
      {"k-shot v-vector", kshot},
      {"non-negative activations", nonnegativity},
      {"autodiff against finite differences", autodiff},
      {"sinusoid meta-training", [&] { return run.sinusoid(); }},
      {"fine-tuning resilience", [&] { return run.resilience(); }},
      {"depth sweep", [&] { return run.depth(); }},
      {"out-of-distribution trend", [&] { return run.ood(); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return std::min(failed, 125);
}

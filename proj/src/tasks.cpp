#include "gbml/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace gbml::tasks {

std::string to_string(Family f) {
  switch (f) {
    case Family::Sinusoid:
      return "sinusoid";
    case Family::Polynomial:
      return "polynomial";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "sinusoid") return Family::Sinusoid;
  if (s == "polynomial") return Family::Polynomial;
  throw std::invalid_argument("unknown task family '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Amplitude:
      return "amplitude";
    case SweepAxis::Phase:
      return "phase";
    case SweepAxis::Scale:
      return "scale";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "amplitude") return SweepAxis::Amplitude;
  if (s == "phase") return SweepAxis::Phase;
  if (s == "scale") return SweepAxis::Scale;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

void TaskRanges::validate() const {
  for (const auto* iv : {&amplitude, &phase, &input}) {
    if (!(iv->lo <= iv->hi)) throw std::invalid_argument("task range has lower > upper bound");
  }
  if (k_shot == 0) throw std::invalid_argument("k_shot must be >= 1");
}

TaskRanges sinusoid_in_distribution() { return TaskRanges{}; }

TaskRanges sinusoid_out_of_distribution() {
  TaskRanges r;
  r.amplitude = {5.0, 10.0};
  r.phase = {std::numbers::pi, 2.0 * std::numbers::pi};
  return r;
}

namespace {

ad::Tensor column(const std::vector<double>& v) { return ad::Tensor::matrix(v.size(), 1, v); }

double draw(Rng& rng, const Interval& iv) {
  const double v = rng.uniform(iv.lo, iv.hi);
  if (!iv.contains(v)) throw std::logic_error("sampled value escaped its interval");
  return v;
}

}  // namespace

ad::Tensor Task::support_inputs() const { return column(support_x); }
ad::Tensor Task::support_targets() const { return column(support_y); }
ad::Tensor Task::query_inputs() const { return column(query_x); }
ad::Tensor Task::query_targets() const { return column(query_y); }

double sinusoid_value(double amplitude, double phase, double x) {
  return amplitude * std::sin(x + phase);
}

double polynomial_value(const models::TaskDescriptor& c, double x) {
  if (c.size() != 4) throw std::invalid_argument("polynomial descriptor must have 4 values");
  return ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
}

double evaluate(Family family, const models::TaskDescriptor& d, double x) {
  if (family == Family::Sinusoid) {
    if (d.size() != 2) throw std::invalid_argument("sinusoid descriptor must have 2 values");
    return sinusoid_value(d[0], d[1], x);
  }
  return polynomial_value(d, x);
}

Task sample_sinusoid(Rng& rng, const TaskRanges& ranges) {
  ranges.validate();
  Task t;
  t.family = Family::Sinusoid;
  const double a = draw(rng, ranges.amplitude);
  const double p = draw(rng, ranges.phase);
  t.descriptor = {a, p};
  for (std::size_t i = 0; i < ranges.k_shot; ++i) {
    const double x = draw(rng, ranges.input);
    t.support_x.push_back(x);
    t.support_y.push_back(sinusoid_value(a, p, x));
  }
  for (std::size_t i = 0; i < ranges.query_size; ++i) {
    const double x = draw(rng, ranges.input);
    t.query_x.push_back(x);
    t.query_y.push_back(sinusoid_value(a, p, x));
  }
  return t;
}

Task sample_polynomial(Rng& rng, const PolynomialRanges& ranges) {
  if (ranges.k_shot == 0) throw std::invalid_argument("k_shot must be >= 1");
  Task t;
  t.family = Family::Polynomial;
  for (int i = 0; i < 4; ++i) t.descriptor.push_back(draw(rng, ranges.coefficient));
  while (t.support_x.size() < ranges.k_shot) {
    const double x = draw(rng, ranges.input);
    if (std::find(t.support_x.begin(), t.support_x.end(), x) != t.support_x.end()) continue;
    t.support_x.push_back(x);
    t.support_y.push_back(polynomial_value(t.descriptor, x));
  }
  for (std::size_t i = 0; i < ranges.query_size; ++i) {
    const double x = draw(rng, ranges.input);
    t.query_x.push_back(x);
    t.query_y.push_back(polynomial_value(t.descriptor, x));
  }
  return t;
}

std::vector<TaskRanges> ood_sweep(Family family, SweepAxis axis, const std::vector<double>& grid,
                                  const TaskRanges& base) {
  if (grid.empty()) throw std::invalid_argument("ood_sweep: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] >= grid[i - 1])) throw std::invalid_argument("ood_sweep: grid must be monotone");
  }
  if (family == Family::Polynomial && axis != SweepAxis::Scale) {
    throw std::invalid_argument("ood_sweep: polynomial tasks only support the scale axis");
  }
  std::vector<TaskRanges> out;
  for (double g : grid) {
    TaskRanges r = base;
    switch (axis) {
      case SweepAxis::Amplitude:
        r.amplitude.hi = g;
        break;
      case SweepAxis::Phase:
        r.phase.hi = g;
        break;
      case SweepAxis::Scale:
        if (!(g > 0.0)) throw std::invalid_argument("ood_sweep: scale factors must be positive");
        r.input = {base.input.lo * g, base.input.hi * g};
        break;
    }
    r.validate();
    out.push_back(r);
  }
  return out;
}

namespace {

void write_values(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key;
  for (double x : v) os << ' ' << x;
  os << '\n';
}

void write_pairs(std::ostream& os, const char* key, const std::vector<double>& xs,
                 const std::vector<double>& ys) {
  os << key << ' ' << xs.size();
  for (std::size_t i = 0; i < xs.size(); ++i) os << ' ' << xs[i] << ' ' << ys[i];
  os << '\n';
}

}  // namespace

void write_task_record(std::ostream& os, const Task& task, std::size_t index) {
  const auto old_precision = os.precision();
  os << std::setprecision(17);
  os << "task " << index << '\n';
  os << "family " << to_string(task.family) << '\n';
  write_values(os, "descriptor", task.descriptor);
  write_pairs(os, "support", task.support_x, task.support_y);
  write_pairs(os, "query", task.query_x, task.query_y);
  os << "end\n";
  os.precision(old_precision);
}

}  // namespace gbml::tasks

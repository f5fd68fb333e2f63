#pragma once

#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "gbml/models.hpp"
#include "gbml/rng.hpp"
#include "gbml/tensor.hpp"

namespace gbml::tasks {

enum class Family { Sinusoid, Polynomial };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct TaskRanges {
  Interval amplitude{0.1, 5.0};
  Interval phase{0.0, std::numbers::pi};
  Interval input{-5.0, 5.0};
  std::size_t k_shot = 5;
  std::size_t query_size = 100;

  /// Throws std::invalid_argument on inverted intervals or k_shot == 0.
  void validate() const;
};

/// Meta-training distribution for sinusoids.
TaskRanges sinusoid_in_distribution();
/// Extrapolated amplitudes [5, 10] and phases [pi, 2 pi].
TaskRanges sinusoid_out_of_distribution();

struct PolynomialRanges {
  Interval coefficient{-1.0, 1.0};
  Interval input{-3.0, 3.0};
  std::size_t k_shot = 40;
  std::size_t query_size = 100;
};

struct Task {
  Family family = Family::Sinusoid;
  models::TaskDescriptor descriptor;
  std::vector<double> support_x;
  std::vector<double> support_y;
  std::vector<double> query_x;
  std::vector<double> query_y;

  /// [n x 1] column tensors for the model.
  ad::Tensor support_inputs() const;
  ad::Tensor support_targets() const;
  ad::Tensor query_inputs() const;
  ad::Tensor query_targets() const;
};

/// y = A sin(x + phase).
double sinusoid_value(double amplitude, double phase, double x);
/// y = c3 x^3 + c2 x^2 + c1 x + c0 for descriptor [c3, c2, c1, c0].
double polynomial_value(const models::TaskDescriptor& c, double x);
/// Noise-free label for the task's family and descriptor.
double evaluate(Family family, const models::TaskDescriptor& descriptor, double x);

Task sample_sinusoid(Rng& rng, const TaskRanges& ranges);
/// Support inputs are pairwise distinct (resampled on exact collision).
Task sample_polynomial(Rng& rng, const PolynomialRanges& ranges = {});

enum class SweepAxis { Amplitude, Phase, Scale };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

/// Range sets moving from the in-distribution ranges toward extrapolated ones.
/// Amplitude and phase grids set the interval's upper bound, keeping the
/// in-distribution lower bound; the scale grid multiplies the input interval.
std::vector<TaskRanges> ood_sweep(Family family, SweepAxis axis, const std::vector<double>& grid,
                                  const TaskRanges& base = sinusoid_in_distribution());

/// One task record per call; see docs/formats.md.
void write_task_record(std::ostream& os, const Task& task, std::size_t index);

}  // namespace gbml::tasks

#pragma once

#include <cstddef>
#include <vector>

#include "gbml/tensor.hpp"

namespace gbml::optim {

using ad::Tensor;
using ParamList = std::vector<Tensor>;

/// params - lr * grads, elementwise. Taped if any input is taped.
ParamList sgd_step(const ParamList& params, const ParamList& grads, double lr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for Adam; shapes mirror the parameter list.
struct AdamState {
  AdamHyper hyper;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState init(const ParamList& params, AdamHyper hyper = {});
};

struct AdamResult {
  AdamState state;
  ParamList params;
};

/// One bias-corrected Adam update. Pure: inputs are never modified.
AdamResult adam_step(const AdamState& state, const ParamList& params, const ParamList& grads);

}  // namespace gbml::optim

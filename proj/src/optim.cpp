#include "gbml/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gbml::optim {

namespace {

void check_matching(const ParamList& params, const ParamList& grads, const char* what) {
  if (params.size() != grads.size()) {
    throw ad::ShapeError(std::string(what) + ": " + std::to_string(params.size()) +
                         " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ad::ShapeError(std::string(what) + ": parameter " + std::to_string(i) +
                           " has shape " + ad::to_string(params[i].shape()) +
                           " but its gradient has shape " + ad::to_string(grads[i].shape()));
    }
  }
}

}  // namespace

ParamList sgd_step(const ParamList& params, const ParamList& grads, double lr) {
  check_matching(params, grads, "sgd_step");
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  ParamList out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back(ad::sub(params[i], ad::scale(grads[i], lr)));
  }
  return out;
}

AdamState AdamState::init(const ParamList& params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

AdamResult adam_step(const AdamState& state, const ParamList& params, const ParamList& grads) {
  check_matching(params, grads, "adam_step");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ad::ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  AdamResult r{state, {}};
  auto& s = r.state;
  const auto& h = s.hyper;
  s.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
  r.params.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (s.m[i].size() != params[i].size()) {
      throw ad::ShapeError("adam_step: accumulator " + std::to_string(i) + " holds " +
                           std::to_string(s.m[i].size()) + " values for parameter of shape " +
                           ad::to_string(params[i].shape()));
    }
    const auto p = params[i].data();
    const auto g = grads[i].data();
    std::vector<double> next(p.begin(), p.end());
    for (std::size_t k = 0; k < next.size(); ++k) {
      s.m[i][k] = h.beta1 * s.m[i][k] + (1.0 - h.beta1) * g[k];
      s.v[i][k] = h.beta2 * s.v[i][k] + (1.0 - h.beta2) * g[k] * g[k];
      const double mhat = s.m[i][k] / bc1;
      const double vhat = s.v[i][k] / bc2;
      next[k] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
    r.params.emplace_back(params[i].shape(), std::move(next));
  }
  return r;
}

}  // namespace gbml::optim

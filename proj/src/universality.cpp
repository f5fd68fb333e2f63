#include "gbml/universality.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gbml/tensor.hpp"

namespace gbml::universality {

KernelForm kernel_form_from_string(const std::string& s) {
  if (s == "symmetric") return KernelForm::Symmetric;
  if (s == "shifted") return KernelForm::Shifted;
  throw std::invalid_argument("unknown kernel form '" + s + "'");
}

std::string to_string(KernelForm k) { return k == KernelForm::Symmetric ? "symmetric" : "shifted"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse") return LossKind::SquaredError;
  if (s == "xent") return LossKind::CrossEntropy;
  if (s == "l1") return LossKind::L1;
  if (s == "hinge") return LossKind::Hinge;
  if (s == "huber") return LossKind::Huber;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::SquaredError:
      return "mse";
    case LossKind::CrossEntropy:
      return "xent";
    case LossKind::L1:
      return "l1";
    case LossKind::Hinge:
      return "hinge";
    case LossKind::Huber:
      return "huber";
  }
  return "?";
}

double Construction::bin_center(std::size_t j) const {
  if (j >= bins) throw DomainError("bin index " + std::to_string(j) + " out of range");
  return 0.5 * (bin_edges[j] + bin_edges[j + 1]);
}

// ---------------------------------------------------------------------------
// Features

std::size_t bin_of(double x, std::span<const double> edges) {
  if (edges.size() < 2) throw std::invalid_argument("need at least two bin edges");
  if (!(x >= edges.front() && x <= edges.back())) {
    throw DomainError("input " + std::to_string(x) + " outside [" + std::to_string(edges.front()) +
                      ", " + std::to_string(edges.back()) + "]");
  }
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  const auto idx = static_cast<std::size_t>(it - edges.begin());
  return std::min(idx, edges.size() - 1) - 1;
}

Vector discr(double x, std::span<const double> edges) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(edges.size() - 1));
  v(static_cast<Eigen::Index>(bin_of(x, edges))) = 1.0;
  return v;
}

Vector phi_tilde(double x, double theta_b, std::span<const double> edges) {
  const auto b = static_cast<Eigen::Index>(edges.size() - 1);
  Vector v = Vector::Zero(2 * b);
  v.segment(theta_b == 0.0 ? 0 : b, b) = discr(x, edges);
  return v;
}

Vector phi_feature(const Construction& c, double x, double theta_b) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(c.dim()));
  v.head(static_cast<Eigen::Index>(c.top_dim())) = phi_tilde(x, theta_b, c.bin_edges);
  v(v.size() - 1) = theta_b;
  return v;
}

// ---------------------------------------------------------------------------
// Selector and kernel matrices

namespace {

void check_pair(std::size_t j, std::size_t l, std::size_t bins) {
  if (j >= bins || l >= bins) {
    throw DomainError("bin pair (" + std::to_string(j) + ", " + std::to_string(l) +
                      ") out of range for " + std::to_string(bins) + " bins");
  }
}

std::pair<std::size_t, std::size_t> pair_at(const Construction& c, std::size_t i) {
  const auto p = i - 2;
  return {p % c.bins, p / c.bins};
}

void check_position(const Construction& c, std::size_t i) {
  if (i < 1 || i > c.chain_length) {
    throw DomainError("chain position " + std::to_string(i) + " outside 1.." +
                      std::to_string(c.chain_length));
  }
}

}  // namespace

Matrix build_Bjl(std::size_t j, std::size_t l, std::size_t bins, double epsilon, KernelForm form) {
  check_pair(j, l, bins);
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  const auto b = static_cast<Eigen::Index>(bins);
  const auto jj = static_cast<Eigen::Index>(j);
  const auto ll = static_cast<Eigen::Index>(l);
  Matrix m;
  if (form == KernelForm::Shifted) {
    m = epsilon * Matrix::Identity(2 * b, 2 * b);
    m(jj, jj) += 1.0;
    m(jj, b + ll) += 1.0;
    m(b + ll, jj) += 1.0;
  } else {
    m = Matrix::Identity(2 * b, 2 * b);
    m(jj, b + ll) += 0.5;
    m(b + ll, jj) += 0.5;
  }
  return m;
}

Vector build_Ajl(std::size_t j, std::size_t l, std::size_t bins, std::size_t label_dim,
                 double epsilon, std::size_t selector_offset) {
  check_pair(j, l, bins);
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  const auto pairs = bins * bins;
  Vector a = Vector::Constant(static_cast<Eigen::Index>(pairs * label_dim), epsilon);
  const auto k = (j + bins * l + selector_offset) % pairs;
  a.segment(static_cast<Eigen::Index>(k * label_dim), static_cast<Eigen::Index>(label_dim))
      .setConstant(1.0 + epsilon);
  return a;
}

Vector selector_at(const Construction& c, std::size_t i) {
  check_position(c, i);
  const auto n = static_cast<Eigen::Index>(c.middle_dim());
  if (i == 1) return Vector::Ones(n);
  if (i == c.chain_length) return Vector::Constant(n, c.epsilon);
  const auto [j, l] = pair_at(c, i);
  return build_Ajl(j, l, c.bins, c.label_dim, c.epsilon, c.selector_offset);
}

Matrix kernel_matrix_at(const Construction& c, std::size_t i) {
  check_position(c, i);
  const auto n = static_cast<Eigen::Index>(c.top_dim());
  if (i == 1) return c.epsilon * Matrix::Identity(n, n);
  if (i == c.chain_length) return Matrix::Identity(n, n);
  const auto [j, l] = pair_at(c, i);
  return build_Bjl(j, l, c.bins, c.epsilon, c.kernel);
}

double kernel_value(const Construction& c, std::size_t i, double x, double xstar,
                    double theta_b_post) {
  const Matrix b = kernel_matrix_at(c, i);
  const Vector left = b * phi_tilde(x, 0.0, c.bin_edges);
  const Vector right = b * phi_tilde(xstar, theta_b_post, c.bin_edges);
  return left.dot(right);
}

// ---------------------------------------------------------------------------
// Construction and chain

Construction build_construction(const ConstructionOptions& o) {
  if (o.bins < 1) throw std::invalid_argument("construction needs at least one bin");
  if (o.label_dim < 1) throw std::invalid_argument("label_dim must be >= 1");
  if (!(o.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(o.alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(o.domain_lo < o.domain_hi)) throw std::invalid_argument("empty input domain");

  Construction c;
  c.bins = o.bins;
  c.label_dim = o.label_dim;
  c.chain_length = o.bins * o.bins + 2;
  c.epsilon = o.epsilon;
  c.alpha = o.alpha;
  c.kernel = o.kernel;
  c.selector_offset = o.selector_offset;
  for (std::size_t k = 0; k <= o.bins; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(o.bins);
    c.bin_edges.push_back(k == o.bins ? o.domain_hi : o.domain_lo + t * (o.domain_hi - o.domain_lo));
  }

  const auto n = c.chain_length;
  const auto top = static_cast<Eigen::Index>(c.top_dim());
  c.top_factors.push_back(Matrix::Identity(top, top));
  for (std::size_t i = 1; i <= n; ++i) c.top_factors.push_back(kernel_matrix_at(c, i));
  for (std::size_t i = 1; i <= n; ++i) c.middle_factors.push_back(selector_at(c, i).cwiseSqrt());
  c.middle_factors.push_back(Vector::Ones(static_cast<Eigen::Index>(c.middle_dim())));
  c.bottom_weights.assign(n, 1.0);

  const auto dy = static_cast<Eigen::Index>(c.label_dim);
  c.head = Matrix::Zero(dy, static_cast<Eigen::Index>(c.dim()));
  for (std::size_t p = 0; p < o.bins * o.bins; ++p) {
    for (Eigen::Index r = 0; r < dy; ++r) {
      c.head(r, top + static_cast<Eigen::Index>(p) * dy + r) = -1.0;
    }
  }
  c.head.col(c.head.cols() - 1).setOnes();
  return c;
}

std::vector<Matrix> chain_from_factors(std::span<const Matrix> top, std::span<const Vector> middle,
                                       std::span<const double> bottom) {
  const auto n = bottom.size();
  if (top.size() != n + 1 || middle.size() != n + 1) {
    throw std::invalid_argument("chain_from_factors: need N + 1 top and middle factors for N weights");
  }
  const auto t = top.front().rows();
  const auto m = middle.front().size();
  std::vector<Matrix> chain;
  chain.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::FullPivLU<Matrix> lu(top[i + 1].transpose());
    if (!lu.isInvertible()) {
      throw std::domain_error("chain_from_factors: top factor " + std::to_string(i + 2) +
                              " is singular");
    }
    if ((middle[i].array() == 0.0).any()) {
      throw std::domain_error("chain_from_factors: middle factor " + std::to_string(i) +
                              " is singular");
    }
    Matrix w = Matrix::Zero(t + m + 1, t + m + 1);
    // W~_i = M~_i M~_{i+1}^-1, solved as M~_{i+1}^T W~_i^T = M~_i^T.
    w.topLeftCorner(t, t) = lu.solve(top[i].transpose()).transpose();
    w.block(t, t, m, m) = (middle[i + 1].array() / middle[i].array()).matrix().asDiagonal();
    w(t + m, t + m) = bottom[i];
    chain.push_back(std::move(w));
  }
  return chain;
}

std::vector<Matrix> build_chain(const Construction& c) {
  return chain_from_factors(c.top_factors, c.middle_factors, c.bottom_weights);
}

Vector stack_label(const Construction& c, const Vector& y) {
  if (static_cast<std::size_t>(y.size()) != c.label_dim) {
    throw std::invalid_argument("label has " + std::to_string(y.size()) + " entries, expected " +
                                std::to_string(c.label_dim));
  }
  return y.replicate(static_cast<Eigen::Index>(c.bins * c.bins), 1);
}

// ---------------------------------------------------------------------------
// Losses

Vector loss_gradient_at_zero(LossKind kind, const Vector& y, double delta) {
  auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  switch (kind) {
    case LossKind::SquaredError:
      return -y;
    case LossKind::CrossEntropy: {
      if (y.size() < 2) throw std::invalid_argument("cross-entropy needs at least two classes");
      return Vector::Constant(y.size(), 1.0 / static_cast<double>(y.size())) - y;
    }
    case LossKind::L1:
    case LossKind::Hinge:
      return -y.unaryExpr(sign);
    case LossKind::Huber: {
      if (!(delta > 0.0)) throw std::invalid_argument("huber delta must be > 0");
      return y.unaryExpr([&](double v) { return std::abs(v) <= delta ? -v : -delta * sign(v); });
    }
  }
  throw std::invalid_argument("unsupported loss");
}

Vector error_gradient(const Construction& c, const Vector& y, LossKind kind) {
  if (kind != LossKind::SquaredError && kind != LossKind::CrossEntropy) {
    throw std::invalid_argument("error_gradient: loss '" + to_string(kind) +
                                "' does not give a label-recoverable gradient");
  }
  if (static_cast<std::size_t>(y.size()) != c.label_dim) {
    throw std::invalid_argument("error_gradient: label dimension mismatch");
  }
  return c.head.transpose() * loss_gradient_at_zero(kind, y);
}

// ---------------------------------------------------------------------------
// Forward pass and the inner step

NetworkState initial_state(const Construction& c) {
  return NetworkState{build_chain(c), c.head, c.theta_b};
}

std::vector<Vector> chain_activations(const NetworkState& s, const Vector& phi) {
  std::vector<Vector> acts;
  acts.reserve(s.chain.size() + 1);
  acts.push_back(phi);
  for (auto it = s.chain.rbegin(); it != s.chain.rend(); ++it) acts.push_back(*it * acts.back());
  return acts;
}

Vector forward_z(const Construction& c, const NetworkState& s, double x) {
  return chain_activations(s, phi_feature(c, x, s.theta_b)).back();
}

namespace {

Vector middle_of(const Construction& c, const Vector& z) {
  return z.segment(static_cast<Eigen::Index>(c.top_dim()), static_cast<Eigen::Index>(c.middle_dim()));
}

}  // namespace

StepResult gradient_step(const Construction& c, const NetworkState& s,
                         std::span<const LabeledPoint> support) {
  if (support.empty()) throw std::invalid_argument("gradient_step: empty support set");
  const auto n = s.chain.size();
  const auto d = static_cast<Eigen::Index>(c.dim());
  StepResult r;
  r.chain_grads.assign(n, Matrix::Zero(d, d));
  r.head_grad = Matrix::Zero(s.head.rows(), s.head.cols());
  r.error = Vector::Zero(d);

  for (const auto& p : support) {
    const auto acts = chain_activations(s, phi_feature(c, p.x, s.theta_b));
    const Vector& z = acts.back();
    if (middle_of(c, z).norm() > c.branch_tolerance()) {
      throw AmbiguousBranchError("gradient_step: support point is not on the pre-update branch");
    }
    if (p.y.size() != s.head.rows()) throw std::invalid_argument("gradient_step: label size");
    const Vector g = s.head * z - p.y;
    Vector a = s.head.transpose() * g;
    r.error += a;
    r.head_grad += g * z.transpose();
    // acts[n - i] is the input to W_i (1-based); a runs through (W_1..W_{i-1})^T e.
    for (std::size_t i = 1; i <= n; ++i) {
      r.chain_grads[i - 1] += a * acts[n - i].transpose();
      a = s.chain[i - 1].transpose() * a;
    }
    r.theta_b_grad += a(d - 1);
  }

  const double inv = 1.0 / static_cast<double>(support.size());
  for (auto& g : r.chain_grads) g *= inv;
  r.head_grad *= inv;
  r.theta_b_grad *= inv;
  r.error *= inv;

  r.updated = s;
  for (std::size_t i = 0; i < n; ++i) r.updated.chain[i] -= c.alpha * r.chain_grads[i];
  r.updated.head -= c.alpha * r.head_grad;
  r.updated.theta_b -= c.alpha * r.theta_b_grad;
  return r;
}

namespace {

ad::Tensor to_tensor(const Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) v[static_cast<std::size_t>(r * m.cols() + k)] = m(r, k);
  }
  return ad::Tensor::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                            std::move(v));
}

Matrix to_matrix(const ad::Tensor& t) {
  Matrix m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t k = 0; k < t.cols(); ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = t.at(r, k);
  }
  return m;
}

}  // namespace

std::vector<Matrix> autodiff_chain_gradients(const Construction& c, const NetworkState& s,
                                             const LabeledPoint& point) {
  ad::Tape tape;
  std::vector<ad::Tensor> weights;
  for (const auto& w : s.chain) weights.push_back(tape.variable(to_tensor(w)));
  const Vector phi = phi_feature(c, point.x, s.theta_b);
  ad::Tensor h = to_tensor(phi.transpose());
  for (auto it = weights.rbegin(); it != weights.rend(); ++it) h = ad::matmul(h, *it, false, true);
  const ad::Tensor pred = ad::matmul(h, to_tensor(s.head), false, true);
  const ad::Tensor diff = pred - to_tensor(point.y.transpose());
  const ad::Tensor loss = ad::scale(ad::sum(diff * diff), 0.5);
  std::vector<Matrix> out;
  for (const auto& g : ad::backward(loss, weights)) out.push_back(to_matrix(g));
  return out;
}

// ---------------------------------------------------------------------------
// Closed form and v-vectors

namespace {

double post_step_theta_b(const Construction& c, const Vector& y) {
  const double bottom_product =
      std::accumulate(c.bottom_weights.begin(), c.bottom_weights.end(), 1.0, std::multiplies<>());
  const Vector e = error_gradient(c, y);
  return c.theta_b - c.alpha * bottom_product * e(e.size() - 1);
}

}  // namespace

Vector v_vector(const Construction& c, double x, const Vector& y, double xstar) {
  const Vector e = error_gradient(c, y);
  const Vector ebar = middle_of(c, e);
  const double theta_post = post_step_theta_b(c, y);
  Vector v = Vector::Zero(ebar.size());
  for (std::size_t i = 1; i <= c.chain_length; ++i) {
    const double k = kernel_value(c, i, x, xstar, theta_post);
    v += selector_at(c, i).cwiseProduct(ebar) * k;
  }
  return v;
}

Vector closed_form_zbar(const Construction& c, double x, const Vector& y, double xstar) {
  return -c.alpha * v_vector(c, x, y, xstar);
}

Vector gradient_step_zbar(const Construction& c, double x, const Vector& y, double xstar) {
  const LabeledPoint p{x, y};
  const auto step = gradient_step(c, initial_state(c), std::span(&p, 1));
  return middle_of(c, forward_z(c, step.updated, xstar));
}

DecodedV decode_v(const Construction& c, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != c.middle_dim()) {
    throw std::invalid_argument("decode_v: vector has the wrong length");
  }
  const auto dy = static_cast<Eigen::Index>(c.label_dim);
  const auto pairs = c.bins * c.bins;
  std::size_t best = 0;
  double best_norm = -1.0;
  double runner_up = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const double nrm = v.segment(static_cast<Eigen::Index>(p) * dy, dy).norm();
    if (nrm > best_norm) {
      runner_up = std::max(runner_up, best_norm);
      best_norm = nrm;
      best = p;
    } else {
      runner_up = std::max(runner_up, nrm);
    }
  }
  if (best_norm == 0.0) throw DecodeError("decode_v: zero vector (label is zero)");
  if (runner_up > 0.0 && best_norm < kDecodeMargin * runner_up) {
    throw DecodeError("decode_v: no dominant block (ratio " + std::to_string(best_norm / runner_up) +
                      " < " + std::to_string(kDecodeMargin) + "); epsilon too large");
  }
  const double kernel_gain = c.kernel == KernelForm::Shifted ? 1.0 + 2.0 * c.epsilon : 1.0;
  DecodedV out;
  out.j = best % c.bins;
  out.l = best / c.bins;
  out.y = v.segment(static_cast<Eigen::Index>(best) * dy, dy) / ((1.0 + c.epsilon) * kernel_gain);
  return out;
}

Vector kshot_v(const Construction& c, std::span<const LabeledPoint> support, double xstar) {
  if (support.empty()) throw std::invalid_argument("kshot_v: empty support set");
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return support[a].x < support[b].x; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (support[order[k]].x == support[order[k - 1]].x) {
      throw DuplicateInputError("kshot_v: two support points share input " +
                                std::to_string(support[order[k]].x));
    }
  }
  Vector acc = Vector::Zero(static_cast<Eigen::Index>(c.middle_dim()));
  for (auto k : order) acc += v_vector(c, support[k].x, support[k].y, xstar);
  return acc / static_cast<double>(support.size());
}

// ---------------------------------------------------------------------------
// Output function

double TargetTable::at(std::size_t j, std::size_t label, std::size_t l) const {
  return values.at((j * labels.size() + label) * bins + l);
}

double& TargetTable::at(std::size_t j, std::size_t label, std::size_t l) {
  return values.at((j * labels.size() + label) * bins + l);
}

double TargetTable::lookup(std::size_t j, double y, std::size_t l) const {
  if (labels.empty()) throw std::logic_error("target table has no labels");
  if (y <= labels.front()) return at(j, 0, l);
  if (y >= labels.back()) return at(j, labels.size() - 1, l);
  const auto it = std::upper_bound(labels.begin(), labels.end(), y);
  const auto hi = static_cast<std::size_t>(it - labels.begin());
  const auto lo = hi - 1;
  const double t = (y - labels[lo]) / (labels[hi] - labels[lo]);
  return (1.0 - t) * at(j, lo, l) + t * at(j, hi, l);
}

std::vector<double> default_label_grid() { return {-1.0, -0.5, 0.5, 1.0}; }

TargetTable random_table(std::size_t bins, std::vector<double> labels, Rng& rng) {
  if (!std::is_sorted(labels.begin(), labels.end())) {
    throw std::invalid_argument("random_table: label grid must be sorted");
  }
  TargetTable t{bins, std::move(labels), {}};
  t.values.resize(bins * t.labels.size() * bins);
  for (auto& v : t.values) v = rng.uniform(-1.0, 1.0);
  return t;
}

double h_post(const Construction& c, const TargetTable& table, const Vector& zbar) {
  if (c.label_dim != 1) throw std::invalid_argument("h_post: table lookup needs d_y = 1");
  if (zbar.norm() == 0.0) return 0.0;
  if (!(c.alpha > 0.0)) throw std::invalid_argument("h_post: alpha must be > 0");
  const auto d = decode_v(c, zbar / -c.alpha);
  return table.lookup(d.j, d.y(0), d.l);
}

double f_out(const Construction& c, const Matrix& head, const TargetTable& table, const Vector& z) {
  if (c.label_dim != 1) throw std::invalid_argument("f_out: scalar output needs d_y = 1");
  if (static_cast<std::size_t>(z.size()) != c.dim()) {
    throw std::invalid_argument("f_out: activation has the wrong length");
  }
  const Vector zbar = middle_of(c, z);
  const double nrm = zbar.norm();
  const double tau = c.branch_tolerance();
  if (nrm <= tau) return (head * z)(0);
  if (nrm >= 2.0 * tau) return h_post(c, table, zbar);
  throw AmbiguousBranchError("f_out: |zbar| = " + std::to_string(nrm) + " lies between " +
                             std::to_string(tau) + " and " + std::to_string(2.0 * tau));
}

double adapted_prediction(const Construction& c, const TargetTable& table, double x, double y,
                          double xstar) {
  const LabeledPoint p{x, Vector::Constant(1, y)};
  const auto step = gradient_step(c, initial_state(c), std::span(&p, 1));
  return f_out(c, step.updated.head, table, forward_z(c, step.updated, xstar));
}

// ---------------------------------------------------------------------------
// Loss-gradient analysis

GradientMatrix loss_gradient_matrix(LossKind kind, std::size_t label_dim) {
  if (label_dim < 1) throw std::invalid_argument("label_dim must be >= 1");
  const auto d = static_cast<Eigen::Index>(label_dim);
  GradientMatrix g;
  if (kind == LossKind::SquaredError) {
    g.A = -Matrix::Identity(d, d);
  } else if (kind == LossKind::CrossEntropy) {
    if (label_dim < 2) throw std::invalid_argument("cross-entropy needs at least two classes");
    g.A = Matrix::Constant(d, d, 1.0 / static_cast<double>(d)) - Matrix::Identity(d, d);
  } else {
    throw std::invalid_argument("loss '" + to_string(kind) + "' has no linear gradient at zero");
  }
  g.determinant = g.A.determinant();
  Eigen::JacobiSVD<Matrix> svd(g.A);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  g.condition = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  g.invertible = std::abs(g.determinant) > 1e-12 && g.condition < 1e12;
  return g;
}

Counterexample loss_counterexample(LossKind kind, double delta) {
  if (kind != LossKind::L1 && kind != LossKind::Hinge && kind != LossKind::Huber) {
    throw std::invalid_argument("loss_counterexample: '" + to_string(kind) +
                                "' has an injective gradient at zero");
  }
  const double unit = kind == LossKind::Huber ? delta : 1.0;
  for (int a = 1; a <= 8; ++a) {
    for (int b = a + 1; b <= 8; ++b) {
      const Vector y1 = Vector::Constant(1, a * unit);
      const Vector y2 = Vector::Constant(1, b * unit);
      const double g1 = loss_gradient_at_zero(kind, y1, delta)(0);
      const double g2 = loss_gradient_at_zero(kind, y2, delta)(0);
      if (g1 == g2) return {y1(0), y2(0), g1};
    }
  }
  throw std::logic_error("loss_counterexample: no collision on the search grid");
}

}  // namespace gbml::universality

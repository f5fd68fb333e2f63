#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbml/rng.hpp"

namespace gbml::universality {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// No block of a v-vector dominates, or the vector is zero.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ||zbar|| fell strictly between the pre- and post-update thresholds.
class AmbiguousBranchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two K-shot support points share an input value.
class DuplicateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pair-selecting matrix used for the top block.
///   Shifted:   [[E_jj, E_jl], [E_lj, 0]] + eps I  (indefinite for small eps)
///   Symmetric: [[I, E_jl / 2], [E_lj / 2, I]]       (eigenvalues 1/2, 1, 3/2)
enum class KernelForm { Symmetric, Shifted };

KernelForm kernel_form_from_string(const std::string& s);
std::string to_string(KernelForm k);

struct ConstructionOptions {
  std::size_t bins = 5;
  std::size_t label_dim = 1;
  double epsilon = 1e-6;
  double alpha = 1e-3;
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  KernelForm kernel = KernelForm::Symmetric;
  /// Fault injection: A_jl selects block (j + B l + offset) mod B^2.
  std::size_t selector_offset = 0;
};

/// The assembled one-step universality network.
///
/// Chain position i (1-based) runs over 1..N with N = B^2 + 2; position
/// 2 + j + B l belongs to bin pair (j, l). The network output is
/// z = W_1 W_2 ... W_N phi, so W_N touches the features first.
struct Construction {
  std::size_t bins = 0;
  std::size_t label_dim = 0;
  std::size_t chain_length = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  KernelForm kernel = KernelForm::Symmetric;
  std::size_t selector_offset = 0;
  std::vector<double> bin_edges;
  /// Top factors M~_1 .. M~_{N+1}, each 2B x 2B.
  std::vector<Matrix> top_factors;
  /// Diagonals of the middle factors Mbar_0 .. Mbar_N.
  std::vector<Vector> middle_factors;
  std::vector<double> bottom_weights;
  /// Linear head [W~_g, Wbar_g, w_g] as one d_y x dim() matrix.
  Matrix head;
  double theta_b = 0.0;

  std::size_t top_dim() const { return 2 * bins; }
  std::size_t middle_dim() const { return bins * bins * label_dim; }
  std::size_t dim() const { return top_dim() + middle_dim() + 1; }
  std::size_t pair_index(std::size_t j, std::size_t l) const { return j + bins * l; }
  /// Below this norm zbar counts as zero; above twice it, as non-zero.
  double branch_tolerance() const { return alpha * epsilon; }
  double bin_center(std::size_t j) const;
};

Construction build_construction(const ConstructionOptions& opts);

/// One-hot bin indicator; bins are left-closed, the last one also right-closed.
Vector discr(double x, std::span<const double> bin_edges);
std::size_t bin_of(double x, std::span<const double> bin_edges);

/// [discr(x); 0] when theta_b == 0, [0; discr(x)] otherwise.
Vector phi_tilde(double x, double theta_b, std::span<const double> bin_edges);
/// Full feature [phi_tilde; 0; theta_b].
Vector phi_feature(const Construction& c, double x, double theta_b);

Matrix build_Bjl(std::size_t j, std::size_t l, std::size_t bins, double epsilon,
                 KernelForm form = KernelForm::Symmetric);
/// Diagonal of the selector: 1 + eps on block j + B l (plus offset), eps elsewhere.
Vector build_Ajl(std::size_t j, std::size_t l, std::size_t bins, std::size_t label_dim,
                 double epsilon, std::size_t selector_offset = 0);

/// A_i (diagonal) and B_i for chain position i in 1..N.
Vector selector_at(const Construction& c, std::size_t i);
Matrix kernel_matrix_at(const Construction& c, std::size_t i);

/// k_i(x, x*) = phi~(x, 0)^T B_i^T B_i phi~(x*, theta_b').
double kernel_value(const Construction& c, std::size_t i, double x, double xstar,
                    double theta_b_post);

/// Block-diagonal W_1 .. W_N with W~_i = M~_i M~_{i+1}^-1, Wbar_i = Mbar_{i-1}^-1 Mbar_i.
std::vector<Matrix> build_chain(const Construction& c);
std::vector<Matrix> chain_from_factors(std::span<const Matrix> top, std::span<const Vector> middle,
                                       std::span<const double> bottom);

/// Stacks B^2 copies of a d_y label.
Vector stack_label(const Construction& c, const Vector& y);

enum class LossKind { SquaredError, CrossEntropy, L1, Hinge, Huber };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

/// Gradient of the loss with respect to the prediction at prediction 0.
/// Hinge uses sign(y) as the class label; Huber uses threshold `delta`.
Vector loss_gradient_at_zero(LossKind kind, const Vector& y, double delta = 1.0);

/// [W~_g^T g; Wbar_g^T g; w_g^T g] for g the loss gradient at prediction 0.
Vector error_gradient(const Construction& c, const Vector& y,
                      LossKind kind = LossKind::SquaredError);

/// Parameters that move during the inner step.
struct NetworkState {
  std::vector<Matrix> chain;
  Matrix head;
  double theta_b = 0.0;
};

NetworkState initial_state(const Construction& c);

/// Activations phi = h_{N+1}, h_N, ..., h_1 = z, in that order.
std::vector<Vector> chain_activations(const NetworkState& s, const Vector& phi);
Vector forward_z(const Construction& c, const NetworkState& s, double x);

struct LabeledPoint {
  double x = 0.0;
  Vector y;
};

struct StepResult {
  NetworkState updated;
  std::vector<Matrix> chain_grads;
  Matrix head_grad;
  double theta_b_grad = 0.0;
  /// Loss gradient with respect to z, averaged over the support set.
  Vector error;
};

/// One plain gradient-descent step on 1/K sum 1/2 ||y_k - yhat_k||^2, with
/// dense gradients for every chain matrix from the outer-product rule.
StepResult gradient_step(const Construction& c, const NetworkState& s,
                         std::span<const LabeledPoint> support);

/// Same chain gradients computed on the autodiff tape, for cross-checking.
std::vector<Matrix> autodiff_chain_gradients(const Construction& c, const NetworkState& s,
                                             const LabeledPoint& point);

/// sum_i A_i ebar(y) k_i(x, x*), the block-coded description of (x, x*, y).
Vector v_vector(const Construction& c, double x, const Vector& y, double xstar);
/// -alpha * v_vector: the first-order middle block of the post-update z*.
Vector closed_form_zbar(const Construction& c, double x, const Vector& y, double xstar);
/// Middle block of z* after the actual gradient step on every parameter.
Vector gradient_step_zbar(const Construction& c, double x, const Vector& y, double xstar);

struct DecodedV {
  std::size_t j = 0;
  std::size_t l = 0;
  Vector y;
};

/// Minimum ratio between the dominant block norm and the runner-up.
inline constexpr double kDecodeMargin = 10.0;

DecodedV decode_v(const Construction& c, const Vector& v);

/// Mean of per-point v-vectors, summed in ascending x order.
Vector kshot_v(const Construction& c, std::span<const LabeledPoint> support, double xstar);

/// f_target values on (bin of x, label grid point, bin of x*); d_y = 1.
struct TargetTable {
  std::size_t bins = 0;
  std::vector<double> labels;
  std::vector<double> values;

  double at(std::size_t j, std::size_t label, std::size_t l) const;
  double& at(std::size_t j, std::size_t label, std::size_t l);
  /// Piecewise-linear in y between label grid points, clamped at the ends.
  double lookup(std::size_t j, double y, std::size_t l) const;
};

std::vector<double> default_label_grid();
TargetTable random_table(std::size_t bins, std::vector<double> labels, Rng& rng);

/// Decodes zbar / (-alpha) and reads the table; zero maps to zero.
double h_post(const Construction& c, const TargetTable& table, const Vector& zbar);

/// g_pre(z) = head z when ||zbar|| <= tau0, h_post(zbar) when ||zbar|| >= 2 tau0.
double f_out(const Construction& c, const Matrix& head, const TargetTable& table,
             const Vector& z);

/// Post-update prediction at x* after one step on (x, y).
double adapted_prediction(const Construction& c, const TargetTable& table, double x, double y,
                          double xstar);

// ---------------------------------------------------------------------------
// Loss-gradient analysis

struct GradientMatrix {
  Matrix A;
  bool invertible = false;
  double determinant = 0.0;
  double condition = 0.0;
};

/// Linear map A with grad(y, 0) = A y: -I for squared error, C - I for
/// softmax cross-entropy (C constant 1/d_y, valid on one-hot labels).
GradientMatrix loss_gradient_matrix(LossKind kind, std::size_t label_dim);

struct Counterexample {
  double y1 = 0.0;
  double y2 = 0.0;
  double gradient = 0.0;
};

/// Two distinct scalar labels with identical loss gradient at prediction 0.
Counterexample loss_counterexample(LossKind kind, double delta = 1.0);

// ---------------------------------------------------------------------------
// Certificates

enum class Compare { AtMost, AtLeast };

struct Certificate {
  std::string id;
  std::string anchor;
  double measured = 0.0;
  double threshold = 0.0;
  Compare compare = Compare::AtMost;
  bool pass = false;
  std::uint64_t seed = 0;
  std::string note;
};

Certificate make_certificate(std::string id, std::string anchor, double measured,
                             double threshold, Compare compare, std::uint64_t seed,
                             std::string note = {});

Certificate certify_end_to_end(const Construction& c, const TargetTable& table,
                               std::string id = "end_to_end", std::uint64_t seed = 0);
/// err(alpha) / alpha^2 spread across the given alphas, worst instance.
Certificate certify_second_order(const ConstructionOptions& opts, std::span<const double> alphas,
                                 std::size_t instances, std::uint64_t seed);
/// The same ratio test on random dense chains whose gradients interact.
Certificate certify_second_order_generic(std::span<const double> alphas, std::size_t instances,
                                         std::uint64_t seed);
Certificate certify_kernel(const Construction& c);
Certificate certify_kernel_asymmetry(const Construction& c);
Certificate certify_telescoping(const Construction& c);
Certificate certify_gradient_crosscheck(const Construction& c, std::size_t instances,
                                        std::uint64_t seed);
Certificate certify_v_roundtrip(const Construction& c);
Certificate certify_feature_fixed(const Construction& c, std::uint64_t seed);
Certificate certify_pre_update_zero(const Construction& c);
std::vector<Certificate> certify_loss_gradients(std::uint64_t seed);
std::vector<Certificate> certify_kshot(const Construction& c, std::uint64_t seed);
/// Partial-product definiteness, then activation signs pre- and post-update.
std::vector<Certificate> check_nonneg(const Construction& c, std::size_t samples,
                                      std::uint64_t seed);

/// The full suite in report order.
std::vector<Certificate> certify_all(const ConstructionOptions& opts, std::uint64_t seed);

void write_report(std::ostream& os, const ConstructionOptions& opts,
                  const std::vector<Certificate>& certs);

}  // namespace gbml::universality

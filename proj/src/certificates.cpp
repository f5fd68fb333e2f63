#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gbml/universality.hpp"

namespace gbml::universality {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double random_label(Rng& rng) {
  const double mag = rng.uniform(0.1, 1.0);
  return rng.uniform() < 0.5 ? -mag : mag;
}

double max_rel(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

Certificate make_certificate(std::string id, std::string anchor, double measured,
                             double threshold, Compare compare, std::uint64_t seed,
                             std::string note) {
  Certificate c;
  c.id = std::move(id);
  c.anchor = std::move(anchor);
  c.measured = measured;
  c.threshold = threshold;
  c.compare = compare;
  c.pass = compare == Compare::AtMost ? measured <= threshold : measured >= threshold;
  c.seed = seed;
  c.note = std::move(note);
  return c;
}

Certificate certify_end_to_end(const Construction& c, const TargetTable& table, std::string id,
                               std::uint64_t seed) {
  double worst = 0.0;
  std::string note;
  for (std::size_t j = 0; j < c.bins; ++j) {
    for (std::size_t g = 0; g < table.labels.size(); ++g) {
      for (std::size_t l = 0; l < c.bins; ++l) {
        double err = kInf;
        try {
          const double pred =
              adapted_prediction(c, table, c.bin_center(j), table.labels[g], c.bin_center(l));
          err = std::abs(pred - table.at(j, g, l));
        } catch (const std::exception& e) {
          if (note.empty()) note = e.what();
        }
        worst = std::max(worst, err);
      }
    }
  }
  return make_certificate(std::move(id), "one-step adapted prediction reproduces an arbitrary target",
                          worst, 1e-3, Compare::AtMost, seed, note);
}

Certificate certify_second_order(const ConstructionOptions& opts, std::span<const double> alphas,
                                 std::size_t instances, std::uint64_t seed) {
  std::vector<Construction> cs;
  for (double a : alphas) {
    auto o = opts;
    o.alpha = a;
    cs.push_back(build_construction(o));
  }
  Rng rng(seed, 11);
  double worst_spread = 0.0;
  double largest_residue = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const double x = rng.uniform(opts.domain_lo, opts.domain_hi);
    const double xs = rng.uniform(opts.domain_lo, opts.domain_hi);
    const Vector y = Vector::NullaryExpr(static_cast<Eigen::Index>(opts.label_dim),
                                         [&] { return random_label(rng); });
    double lo = kInf;
    double hi = 0.0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const double err =
          (gradient_step_zbar(cs[k], x, y, xs) - closed_form_zbar(cs[k], x, y, xs)).cwiseAbs().maxCoeff();
      largest_residue = std::max(largest_residue, err);
      const double ratio = err / (alphas[k] * alphas[k]);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    worst_spread = std::max(worst_spread, lo > 0.0 ? hi / lo : kInf);
  }
  return make_certificate("second_order_residue",
                          "dropped higher-order terms of the updated activation scale as alpha^2",
                          worst_spread, 2.0, Compare::AtMost, seed,
                          "largest residue " + fmt(largest_residue));
}

Certificate certify_second_order_generic(std::span<const double> alphas, std::size_t instances,
                                         std::uint64_t seed) {
  constexpr Eigen::Index dim = 4;
  constexpr Eigen::Index out = 2;
  constexpr std::size_t depth = 3;
  Rng rng(seed, 12);
  auto noise = [&](Eigen::Index r, Eigen::Index c) {
    return Matrix(Matrix::NullaryExpr(r, c, [&] { return rng.uniform(-1.0, 1.0); }));
  };
  double worst_spread = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    std::vector<Matrix> w;
    for (std::size_t i = 0; i < depth; ++i) w.push_back(Matrix::Identity(dim, dim) + 0.3 * noise(dim, dim));
    const Matrix head = noise(out, dim);
    const Vector phi = noise(dim, 1);
    const Vector phi_star = noise(dim, 1);
    const Vector y = noise(out, 1);

    // z = W_1 W_2 W_3 phi; prefix[i] = W_1..W_i, suffix[i] = W_{i+1}..W_N.
    std::vector<Matrix> prefix(depth + 1, Matrix::Identity(dim, dim));
    std::vector<Matrix> suffix(depth + 1, Matrix::Identity(dim, dim));
    for (std::size_t i = 0; i < depth; ++i) prefix[i + 1] = prefix[i] * w[i];
    for (std::size_t i = depth; i-- > 0;) suffix[i] = w[i] * suffix[i + 1];
    const Vector e = head.transpose() * (head * prefix[depth] * phi - y);
    std::vector<Matrix> grads;
    for (std::size_t i = 0; i < depth; ++i) {
      grads.push_back(prefix[i].transpose() * e * (suffix[i + 1] * phi).transpose());
    }
    Vector first_order_delta = Vector::Zero(dim);
    for (std::size_t i = 0; i < depth; ++i) {
      first_order_delta += prefix[i] * grads[i] * suffix[i + 1] * phi_star;
    }
    double lo = kInf;
    double hi = 0.0;
    for (double a : alphas) {
      Vector z = phi_star;
      for (std::size_t i = depth; i-- > 0;) z = (w[i] - a * grads[i]) * z;
      const Vector linear = prefix[depth] * phi_star - a * first_order_delta;
      const double ratio = (z - linear).cwiseAbs().maxCoeff() / (a * a);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    worst_spread = std::max(worst_spread, lo > 0.0 ? hi / lo : kInf);
  }
  return make_certificate("second_order_generic",
                          "linearized one-step update on random dense chains is accurate to alpha^2",
                          worst_spread, 2.0, Compare::AtMost, seed);
}

Certificate certify_kernel(const Construction& c) {
  double worst = 0.0;
  for (std::size_t i = 1; i <= c.chain_length; ++i) {
    const bool middle = i > 1 && i < c.chain_length;
    for (std::size_t a = 0; a < c.bins; ++a) {
      for (std::size_t b = 0; b < c.bins; ++b) {
        const double k = kernel_value(c, i, c.bin_center(a), c.bin_center(b), 1.0);
        const bool hit = middle && (i - 2) == c.pair_index(a, b);
        worst = std::max(worst, std::abs(k - (hit ? 1.0 : 0.0)));
      }
    }
  }
  return make_certificate("kernel_indicator",
                          "pair kernel is one on its own bin pair and zero elsewhere", worst,
                          10.0 * c.epsilon, Compare::AtMost, 0, "kernel " + to_string(c.kernel));
}

Certificate certify_kernel_asymmetry(const Construction& c) {
  double best = 0.0;
  for (std::size_t j = 0; j < c.bins; ++j) {
    for (std::size_t l = 0; l < c.bins; ++l) {
      if (j == l) continue;
      const auto i = 2 + c.pair_index(j, l);
      const double xj = c.bin_center(j);
      const double xl = c.bin_center(l);
      best = std::max(best, std::abs(kernel_value(c, i, xj, xl, 1.0) - kernel_value(c, i, xl, xj, 1.0)));
    }
  }
  return make_certificate("kernel_asymmetry",
                          "the bias switch separates the roles of training and test input", best,
                          0.5, Compare::AtLeast, 0);
}

Certificate certify_telescoping(const Construction& c) {
  const auto chain = build_chain(c);
  const auto n = c.chain_length;
  const auto t = static_cast<Eigen::Index>(c.top_dim());
  const auto m = static_cast<Eigen::Index>(c.middle_dim());
  double worst = 0.0;

  // Top: W~_{i+1} ... W~_N == M~_{i+1}.
  Matrix top = Matrix::Identity(t, t);
  for (std::size_t i = n; i >= 1; --i) {
    worst = std::max(worst, max_rel(top, c.top_factors[i]));
    top = chain[i - 1].topLeftCorner(t, t) * top;
  }
  // Middle: Wbar_1 ... Wbar_{i-1} == Mbar_{i-1}, and Mbar_{i-1}^2 == A_i.
  Matrix mid = Matrix::Identity(m, m);
  for (std::size_t i = 1; i <= n; ++i) {
    worst = std::max(worst, max_rel(mid, Matrix(c.middle_factors[i - 1].asDiagonal())));
    const Vector sq = c.middle_factors[i - 1].cwiseProduct(c.middle_factors[i - 1]);
    worst = std::max(worst, max_rel(sq, selector_at(c, i)));
    mid = mid * chain[i - 1].block(t, t, m, m);
  }
  return make_certificate("telescoping", "chain partial products collapse to their factors", worst,
                          1e-9, Compare::AtMost, 0, "chain length " + std::to_string(n));
}

Certificate certify_gradient_crosscheck(const Construction& c, std::size_t instances,
                                        std::uint64_t seed) {
  Rng rng(seed, 13);
  const auto s = initial_state(c);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    LabeledPoint p{rng.uniform(c.bin_edges.front(), c.bin_edges.back()),
                   Vector::NullaryExpr(static_cast<Eigen::Index>(c.label_dim),
                                       [&] { return random_label(rng); })};
    const auto outer = gradient_step(c, s, std::span(&p, 1)).chain_grads;
    const auto taped = autodiff_chain_gradients(c, s, p);
    for (std::size_t i = 0; i < outer.size(); ++i) {
      worst = std::max(worst, (outer[i] - taped[i]).cwiseAbs().maxCoeff());
    }
  }
  return make_certificate("gradient_crosscheck",
                          "outer-product chain gradients match reverse-mode differentiation", worst,
                          1e-10, Compare::AtMost, seed);
}

Certificate certify_v_roundtrip(const Construction& c) {
  double worst = 0.0;
  std::string note;
  for (double y : {-1.0, 0.5, 2.0}) {
    const Vector label = Vector::Constant(static_cast<Eigen::Index>(c.label_dim), y);
    for (std::size_t a = 0; a < c.bins; ++a) {
      for (std::size_t b = 0; b < c.bins; ++b) {
        try {
          const auto d = decode_v(c, v_vector(c, c.bin_center(a), label, c.bin_center(b)));
          const double err = (d.j == a && d.l == b) ? (d.y - label).cwiseAbs().maxCoeff() : kInf;
          worst = std::max(worst, err);
        } catch (const DecodeError& e) {
          worst = kInf;
          if (note.empty()) note = e.what();
        }
      }
    }
  }
  return make_certificate("v_roundtrip", "the v-vector losslessly encodes both bins and the label",
                          worst, 1e-6, Compare::AtMost, 0, note);
}

Certificate certify_feature_fixed(const Construction& c, std::uint64_t seed) {
  Rng rng(seed, 14);
  constexpr double h = 1e-4;
  const auto s = initial_state(c);
  auto loss = [&](const Construction& cc, double x, const Vector& y) {
    const Vector z = forward_z(cc, s, x);
    return 0.5 * (y - cc.head * z).squaredNorm();
  };
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double x = rng.uniform(c.bin_edges.front(), c.bin_edges.back());
    const Vector y = Vector::NullaryExpr(static_cast<Eigen::Index>(c.label_dim),
                                         [&] { return random_label(rng); });
    for (std::size_t k = 1; k + 1 < c.bin_edges.size(); ++k) {
      if (std::abs(x - c.bin_edges[k]) <= 2.0 * h) continue;
      Construction plus = c;
      Construction minus = c;
      plus.bin_edges[k] += h;
      minus.bin_edges[k] -= h;
      worst = std::max(worst, std::abs(loss(plus, x, y) - loss(minus, x, y)) / (2.0 * h));
      const Vector dphi = (phi_feature(plus, x, 0.0) - phi_feature(minus, x, 0.0)) / (2.0 * h);
      worst = std::max(worst, dphi.cwiseAbs().maxCoeff());
    }
  }
  return make_certificate("feature_extractor_fixed",
                          "the discretizing feature extractor receives no gradient", worst, 0.0,
                          Compare::AtMost, seed);
}

Certificate certify_pre_update_zero(const Construction& c) {
  const auto s = initial_state(c);
  const TargetTable empty{c.bins, {0.0}, std::vector<double>(c.bins * c.bins, 0.0)};
  double worst = 0.0;
  std::string note;
  std::vector<double> xs(c.bin_edges.begin(), c.bin_edges.end());
  for (std::size_t j = 0; j < c.bins; ++j) xs.push_back(c.bin_center(j));
  for (double x : xs) {
    try {
      worst = std::max(worst, std::abs(f_out(c, s.head, empty, forward_z(c, s, x))));
    } catch (const std::exception& e) {
      worst = kInf;
      note = e.what();
    }
  }
  return make_certificate("pre_update_output_zero",
                          "before adaptation the multiplexer takes the linear head and outputs zero",
                          worst, 0.0, Compare::AtMost, 0, note);
}

std::vector<Certificate> certify_loss_gradients(std::uint64_t seed) {
  Rng rng(seed, 15);
  std::vector<Certificate> out;

  double mse_lin = 0.0;
  double mse_cond = 0.0;
  for (std::size_t d = 1; d <= 10; ++d) {
    const auto g = loss_gradient_matrix(LossKind::SquaredError, d);
    mse_cond = std::max(mse_cond, g.invertible ? g.condition : kInf);
    for (int t = 0; t < 20; ++t) {
      const Vector y = Vector::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return rng.uniform(-3.0, 3.0); });
      mse_lin = std::max(mse_lin, (loss_gradient_at_zero(LossKind::SquaredError, y) - g.A * y).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(make_certificate("mse_gradient_linear", "squared-error gradient at zero is A y",
                                 mse_lin, 1e-12, Compare::AtMost, seed));
  out.push_back(make_certificate("mse_gradient_invertible",
                                 "squared-error gradient map is invertible (condition number)",
                                 mse_cond, 1e12, Compare::AtMost, seed));

  double xent_lin = 0.0;
  double xent_recover = 0.0;
  double xent_det = kInf;
  for (std::size_t d = 2; d <= 10; ++d) {
    const auto g = loss_gradient_matrix(LossKind::CrossEntropy, d);
    xent_det = std::min(xent_det, std::abs(g.determinant));
    const double c = 1.0 / static_cast<double>(d);
    for (int t = 0; t < 20; ++t) {
      Vector y = Vector::Zero(static_cast<Eigen::Index>(d));
      if (t % 2 == 0) {
        y(static_cast<Eigen::Index>(rng.index(d))) = 1.0;
      } else {
        for (auto& v : y) v = rng.uniform(0.0, 1.0);
        y /= y.sum();
      }
      const Vector grad = loss_gradient_at_zero(LossKind::CrossEntropy, y);
      xent_lin = std::max(xent_lin, (grad - g.A * y).cwiseAbs().maxCoeff());
      const Vector back = Vector::Constant(y.size(), c) - grad;
      xent_recover = std::max(xent_recover, (back - y).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(make_certificate("xent_gradient_linear",
                                 "cross-entropy gradient at zero logits is (C - I) y on labels summing to one",
                                 xent_lin, 1e-12, Compare::AtMost, seed));
  out.push_back(make_certificate("xent_gradient_invertible",
                                 "cross-entropy gradient map C - I is invertible (smallest |det|)",
                                 xent_det, 1e-12, Compare::AtLeast, seed,
                                 "C - I sends the all-ones vector to zero"));
  out.push_back(make_certificate("xent_label_recoverable",
                                 "labels on the probability simplex are recovered from the gradient",
                                 xent_recover, 1e-12, Compare::AtMost, seed));

  for (auto kind : {LossKind::L1, LossKind::Hinge, LossKind::Huber}) {
    const auto ce = loss_counterexample(kind);
    const double g1 = loss_gradient_at_zero(kind, Vector::Constant(1, ce.y1))(0);
    const double g2 = loss_gradient_at_zero(kind, Vector::Constant(1, ce.y2))(0);
    const double gap = ce.y1 != ce.y2 ? std::abs(g1 - g2) : kInf;
    out.push_back(make_certificate("counterexample_" + to_string(kind),
                                   "two distinct labels share one gradient, so the label is lost",
                                   gap, 0.0, Compare::AtMost, seed,
                                   "y1=" + fmt(ce.y1) + " y2=" + fmt(ce.y2) + " grad=" + fmt(ce.gradient)));
  }
  return out;
}

std::vector<Certificate> certify_kshot(const Construction& c, std::uint64_t seed) {
  Rng rng(seed, 16);
  const double lo = c.bin_edges.front();
  const double hi = c.bin_edges.back();
  const double kernel_gain = c.kernel == KernelForm::Shifted ? 1.0 + 2.0 * c.epsilon : 1.0;
  const auto dy = static_cast<Eigen::Index>(c.label_dim);
  std::vector<Certificate> out;

  double worst = 0.0;
  double perm = 0.0;
  for (std::size_t k : {1, 3, 10}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<LabeledPoint> support;
      while (support.size() < k) {
        const double x = rng.uniform(lo, hi);
        if (std::any_of(support.begin(), support.end(), [&](const auto& p) { return p.x == x; })) continue;
        support.push_back({x, Vector::NullaryExpr(dy, [&] { return random_label(rng); })});
      }
      const double xs = rng.uniform(lo, hi);
      const Vector got = kshot_v(c, support, xs);

      auto sorted = support;
      std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
      Vector oracle = Vector::Zero(static_cast<Eigen::Index>(c.middle_dim()));
      const auto ls = bin_of(xs, c.bin_edges);
      for (const auto& p : sorted) {
        const auto block = static_cast<Eigen::Index>(
            (bin_of(p.x, c.bin_edges) + c.bins * ls + c.selector_offset) % (c.bins * c.bins));
        Vector v(oracle.size());
        for (Eigen::Index r = 0; r < v.size(); ++r) {
          const double gain = r / dy == block ? 1.0 + c.epsilon : c.epsilon;
          v(r) = gain * p.y(r % dy) * kernel_gain;
        }
        oracle += v;
      }
      oracle /= static_cast<double>(k);
      worst = std::max(worst, (got - oracle).cwiseAbs().maxCoeff());

      auto shuffled = support;
      std::reverse(shuffled.begin(), shuffled.end());
      if (shuffled.size() > 2) std::swap(shuffled[0], shuffled[1]);
      perm = std::max(perm, (kshot_v(c, shuffled, xs) - got).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(make_certificate("kshot_oracle",
                                 "K-shot v-vector equals the mean of independently built v-vectors",
                                 worst, 0.0, Compare::AtMost, seed, "K in {1,3,10}"));
  out.push_back(make_certificate("kshot_order_invariant",
                                 "K-shot v-vector is bitwise independent of support order", perm, 0.0,
                                 Compare::AtMost, seed));

  double rejected = 0.0;
  try {
    const double x = c.bin_center(0);
    const std::vector<LabeledPoint> dup{{x, Vector::Constant(dy, 0.5)}, {x, Vector::Constant(dy, -0.5)}};
    (void)kshot_v(c, dup, x);
  } catch (const DuplicateInputError&) {
    rejected = 1.0;
  }
  out.push_back(make_certificate("kshot_duplicate_rejected",
                                 "support sets with a repeated input are refused", rejected, 1.0,
                                 Compare::AtLeast, seed));
  return out;
}

std::vector<Certificate> check_nonneg(const Construction& c, std::size_t samples,
                                      std::uint64_t seed) {
  std::vector<Certificate> out;
  const auto chain = build_chain(c);
  const auto n = chain.size();

  // Partial products W_j ... W_N, block by block.
  double min_eig = kInf;
  Matrix prod = Matrix::Identity(static_cast<Eigen::Index>(c.dim()), static_cast<Eigen::Index>(c.dim()));
  const auto t = static_cast<Eigen::Index>(c.top_dim());
  const auto m = static_cast<Eigen::Index>(c.middle_dim());
  for (std::size_t j = n; j >= 1; --j) {
    prod = chain[j - 1] * prod;
    for (const Matrix& block : {Matrix(prod.topLeftCorner(t, t)), Matrix(prod.block(t, t, m, m)),
                                Matrix(prod.bottomRightCorner(1, 1))}) {
      const Matrix sym = 0.5 * (block + block.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
  }
  out.push_back(make_certificate("nonneg_partial_products_psd",
                                 "every partial product of the chain blocks is positive semi-definite",
                                 min_eig, -1e-10, Compare::AtLeast, seed, "smallest eigenvalue"));

  Rng rng(seed, 17);
  const double lo = c.bin_edges.front();
  const double hi = c.bin_edges.back();
  auto count_negative = [](const std::vector<Vector>& acts, double& most_negative) {
    double count = 0.0;
    for (const auto& a : acts) {
      for (double v : a) {
        if (v < -1e-12) ++count;
        most_negative = std::min(most_negative, v);
      }
    }
    return count;
  };

  const auto s = initial_state(c);
  double pre_count = 0.0;
  double pre_min = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = rng.uniform(lo, hi);
    pre_count += count_negative(chain_activations(s, phi_feature(c, x, s.theta_b)), pre_min);
  }
  out.push_back(make_certificate("nonneg_activations_pre",
                                 "chain activations are non-negative before adaptation", pre_count, 0.0,
                                 Compare::AtMost, seed, "most negative " + fmt(pre_min)));

  double post_count = 0.0;
  double post_min = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const LabeledPoint p{rng.uniform(lo, hi), Vector::NullaryExpr(static_cast<Eigen::Index>(c.label_dim),
                                                                  [&] { return random_label(rng); })};
    const auto step = gradient_step(c, s, std::span(&p, 1));
    const double xs = rng.uniform(lo, hi);
    const auto& u = step.updated;
    post_count += count_negative(chain_activations(u, phi_feature(c, xs, u.theta_b)), post_min);
  }
  out.push_back(make_certificate("nonneg_activations_post",
                                 "chain activations are non-negative after adaptation", post_count, 0.0,
                                 Compare::AtMost, seed, "most negative " + fmt(post_min)));
  return out;
}

std::vector<Certificate> certify_all(const ConstructionOptions& opts, std::uint64_t seed) {
  const auto c = build_construction(opts);
  std::vector<Certificate> out;
  if (opts.label_dim == 1) {
    Rng rng(seed, 10);
    const auto table = random_table(opts.bins, default_label_grid(), rng);
    out.push_back(certify_end_to_end(c, table, "end_to_end", seed));
    auto constant = table;
    std::fill(constant.values.begin(), constant.values.end(), 0.25);
    out.push_back(certify_end_to_end(c, constant, "end_to_end_constant", seed));
    auto permuted = table;
    std::reverse(permuted.values.begin(), permuted.values.end());
    out.push_back(certify_end_to_end(c, permuted, "end_to_end_permuted", seed));
    out.push_back(certify_pre_update_zero(c));
  }
  const std::vector<double> alphas{1e-2, 1e-3, 1e-4};
  out.push_back(certify_second_order(opts, alphas, 20, seed));
  out.push_back(certify_second_order_generic(alphas, 20, seed));
  out.push_back(certify_gradient_crosscheck(c, 5, seed));
  out.push_back(certify_kernel(c));
  out.push_back(certify_kernel_asymmetry(c));

  Certificate tele = certify_telescoping(c);
  for (std::size_t b = 1; b < opts.bins; ++b) {
    auto o = opts;
    o.bins = b;
    const auto t = certify_telescoping(build_construction(o));
    tele.measured = std::max(tele.measured, t.measured);
  }
  tele = make_certificate(tele.id, tele.anchor, tele.measured, tele.threshold, tele.compare, 0,
                          "chain lengths 3.." + std::to_string(c.chain_length));
  out.push_back(tele);

  out.push_back(certify_v_roundtrip(c));
  out.push_back(certify_feature_fixed(c, seed));
  for (auto& x : certify_loss_gradients(seed)) out.push_back(std::move(x));
  for (auto& x : certify_kshot(c, seed)) out.push_back(std::move(x));
  for (auto& x : check_nonneg(c, 1000, seed)) out.push_back(std::move(x));
  return out;
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

void write_report(std::ostream& os, const ConstructionOptions& opts,
                  const std::vector<Certificate>& certs) {
  const auto old_precision = os.precision();
  os << std::setprecision(10);
  os << "# universality certificate report\n";
  os << "format 1\n";
  os << "construction bins=" << opts.bins << " label_dim=" << opts.label_dim
     << " epsilon=" << opts.epsilon << " alpha=" << opts.alpha << " kernel=" << to_string(opts.kernel)
     << " domain_lo=" << opts.domain_lo << " domain_hi=" << opts.domain_hi
     << " selector_offset=" << opts.selector_offset << '\n';
  os << "multiplexer exact branch_tolerance=" << opts.alpha * opts.epsilon
     << " h_post=table_decoder\n";
  std::size_t passed = 0;
  for (const auto& c : certs) {
    passed += c.pass ? 1 : 0;
    os << "record id=" << c.id << " pass=" << (c.pass ? 1 : 0) << " measured=" << c.measured
       << " compare=" << (c.compare == Compare::AtMost ? "<=" : ">=") << " threshold=" << c.threshold
       << " seed=" << c.seed << " anchor=" << quoted(c.anchor) << " note=" << quoted(c.note) << '\n';
  }
  os << "summary records=" << certs.size() << " passed=" << passed
     << " failed=" << certs.size() - passed << '\n';
  os.precision(old_precision);
}

}  // namespace gbml::universality

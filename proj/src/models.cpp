#include "gbml/models.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gbml::models {

std::size_t MlpParams::output_dim() const {
  if (layers.empty()) return 0;
  return layers.back().weight.rows();
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = theta_b.size();
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ParamList MlpParams::flatten() const {
  ParamList out;
  out.reserve(2 * layers.size() + 1);
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  if (theta_b.size() > 0) out.push_back(theta_b);
  return out;
}

MlpParams MlpParams::with_values(const ParamList& values) const {
  const std::size_t expected = 2 * layers.size() + (theta_b.size() > 0 ? 1 : 0);
  if (values.size() != expected) {
    throw ad::ShapeError("with_values: expected " + std::to_string(expected) + " tensors, got " +
                         std::to_string(values.size()));
  }
  MlpParams out = *this;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (values[2 * i].shape() != layers[i].weight.shape() ||
        values[2 * i + 1].shape() != layers[i].bias.shape()) {
      throw ad::ShapeError("with_values: layer " + std::to_string(i) + " shape mismatch");
    }
    out.layers[i].weight = values[2 * i];
    out.layers[i].bias = values[2 * i + 1];
  }
  if (theta_b.size() > 0) {
    if (values.back().shape() != theta_b.shape()) {
      throw ad::ShapeError("with_values: theta_b shape mismatch");
    }
    out.theta_b = values.back();
  }
  return out;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ad::ShapeError("mlp has no layers");
  if (theta_b.rank() != 1) throw ad::ShapeError("theta_b must be rank 1");
  std::size_t in = input_dim + theta_b.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& w = layers[i].weight;
    if (w.rank() != 2 || w.cols() != in) {
      throw ad::ShapeError("layer " + std::to_string(i) + " weight " + ad::to_string(w.shape()) +
                           " does not accept " + std::to_string(in) + " inputs");
    }
    if (layers[i].bias.shape() != ad::Shape{w.rows()}) {
      throw ad::ShapeError("layer " + std::to_string(i) + " bias " +
                           ad::to_string(layers[i].bias.shape()) + " does not match weight " +
                           ad::to_string(w.shape()));
    }
    in = w.rows();
  }
}

MlpParams init_mlp(const std::vector<std::size_t>& layer_sizes, std::size_t d_b, Rng& rng) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_mlp: need at least input and output sizes");
  }
  if (layer_sizes.front() <= d_b) {
    throw std::invalid_argument("init_mlp: first size must hold the input plus the d_b columns");
  }
  MlpParams p;
  p.input_dim = layer_sizes.front() - d_b;
  p.theta_b = Tensor::zeros({d_b});
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const auto fan_in = layer_sizes[i];
    const auto fan_out = layer_sizes[i + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-s, s);
    p.layers.push_back({Tensor::matrix(fan_out, fan_in, std::move(w)), Tensor::zeros({fan_out})});
  }
  return p;
}

namespace {

Tensor run_layers(const MlpParams& params, Tensor h) {
  const auto batch = h.rows();
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    h = ad::matmul(h, l.weight, false, true) + ad::broadcast_axis(l.bias, 0, batch);
    if (i + 1 < params.layers.size()) h = ad::relu(h);
  }
  return h;
}

void check_input(const MlpParams& params, const Tensor& x, std::size_t expected_cols) {
  if (x.rank() != 2 || x.cols() != expected_cols) {
    throw ad::ShapeError("forward: input " + ad::to_string(x.shape()) + " but the model expects " +
                         std::to_string(expected_cols) + " columns");
  }
  params.validate();
}

}  // namespace

Tensor forward(const MlpParams& params, const Tensor& x) {
  check_input(params, x, params.input_dim);
  Tensor h = x;
  if (params.theta_b.size() > 0) {
    h = ad::concat_cols(x, ad::broadcast_axis(params.theta_b, 0, x.rows()));
  }
  return run_layers(params, h);
}

Tensor forward_conditioned(const MlpParams& params, const Tensor& x,
                           const TaskDescriptor& desc) {
  if (params.theta_b.size() != 0) {
    throw ad::ShapeError("forward_conditioned: model carries a bias transformation");
  }
  if (x.rank() != 2 || x.cols() + desc.size() != params.input_dim) {
    throw ad::ShapeError("forward_conditioned: input " + ad::to_string(x.shape()) + " plus " +
                         std::to_string(desc.size()) + " descriptor values does not match " +
                         std::to_string(params.input_dim) + " model inputs");
  }
  params.validate();
  const Tensor d = ad::broadcast_axis(Tensor::vector(desc), 0, x.rows());
  return run_layers(params, ad::concat_cols(x, d));
}

double min_abs_preactivation(const MlpParams& params, const Tensor& x) {
  check_input(params, x, params.input_dim);
  Tensor h = x.detach();
  if (params.theta_b.size() > 0) {
    h = ad::concat_cols(h, ad::broadcast_axis(params.theta_b.detach(), 0, x.rows()));
  }
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    h = ad::matmul(h, l.weight.detach(), false, true) +
        ad::broadcast_axis(l.bias.detach(), 0, h.rows());
    for (double v : h.data()) m = std::min(m, std::abs(v));
    h = ad::relu(h);
  }
  return m;
}

std::size_t depth_budget(std::size_t target_params, std::size_t n_hidden_layers) {
  if (n_hidden_layers < 1 || n_hidden_layers > 5) {
    throw std::out_of_range("depth_budget: hidden layer count must be in 1..5, got " +
                            std::to_string(n_hidden_layers));
  }
  if (n_hidden_layers == 1) return 250;
  const double per_layer = static_cast<double>(target_params) /
                           static_cast<double>(n_hidden_layers - 1);
  return static_cast<std::size_t>(std::floor(std::sqrt(per_layer)));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "gbml-mlp";
constexpr int kVersion = 1;

void write_row(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << v[i];
  }
  os << '\n';
}

void expect_token(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want) {
    throw std::runtime_error("checkpoint: expected '" + want + "', found '" + got + "'");
  }
}

std::size_t read_count(std::istream& is, const char* what) {
  long long v = -1;
  if (!(is >> v) || v < 0) throw std::runtime_error(std::string("checkpoint: bad ") + what);
  return static_cast<std::size_t>(v);
}

std::vector<double> read_values(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) {
    if (!(is >> x)) throw std::runtime_error("checkpoint: truncated value block");
  }
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const MlpParams& params) {
  params.validate();
  const auto old_precision = os.precision();
  os << std::setprecision(17);
  os << kMagic << ' ' << kVersion << '\n';
  os << "input_dim " << params.input_dim << '\n';
  os << "theta_b " << params.theta_b.size() << '\n';
  os << "layers " << params.layers.size() << '\n';
  for (const auto& l : params.layers) os << "shape " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
  os << "weights\n";
  for (const auto& l : params.layers) {
    for (std::size_t r = 0; r < l.weight.rows(); ++r) {
      write_row(os, l.weight.data().subspan(r * l.weight.cols(), l.weight.cols()));
    }
  }
  os << "biases\n";
  for (const auto& l : params.layers) write_row(os, l.bias.data());
  os << "theta_b_values\n";
  write_row(os, params.theta_b.data());
  os << "end\n";
  os.precision(old_precision);
}

MlpParams read_checkpoint(std::istream& is) {
  expect_token(is, kMagic);
  int version = 0;
  if (!(is >> version) || version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  MlpParams p;
  expect_token(is, "input_dim");
  p.input_dim = read_count(is, "input_dim");
  expect_token(is, "theta_b");
  const auto d_b = read_count(is, "theta_b size");
  expect_token(is, "layers");
  const auto n_layers = read_count(is, "layer count");
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t i = 0; i < n_layers; ++i) {
    expect_token(is, "shape");
    const auto r = read_count(is, "rows");
    const auto c = read_count(is, "cols");
    shapes.emplace_back(r, c);
  }
  expect_token(is, "weights");
  for (const auto& [r, c] : shapes) {
    p.layers.push_back({Tensor::matrix(r, c, read_values(is, r * c)), Tensor::zeros({r})});
  }
  expect_token(is, "biases");
  for (std::size_t i = 0; i < n_layers; ++i) {
    p.layers[i].bias = Tensor::vector(read_values(is, shapes[i].first));
  }
  expect_token(is, "theta_b_values");
  p.theta_b = Tensor::vector(read_values(is, d_b));
  expect_token(is, "end");
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(os, params);
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace gbml::models

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gbml/optim.hpp"
#include "gbml/rng.hpp"
#include "gbml/tensor.hpp"

namespace gbml::models {

using ad::Tensor;
using optim::ParamList;

struct Layer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
};

/// Fully connected ReLU network with a linear output layer. `theta_b` is the
/// bias-transformation vector concatenated to every input row; it may be empty.
struct MlpParams {
  std::vector<Layer> layers;
  Tensor theta_b = Tensor::zeros({0});
  std::size_t input_dim = 0;

  std::size_t bias_transform_dim() const { return theta_b.size(); }
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  /// weight_0, bias_0, ..., weight_L, bias_L, then theta_b when non-empty.
  ParamList flatten() const;
  /// Inverse of flatten, using this object for structure.
  MlpParams with_values(const ParamList& values) const;
  /// Throws ShapeError unless the layer chain is consistent.
  void validate() const;
};

/// Per-task real vector (sinusoid: [amplitude, phase]; polynomial: [c3, c2, c1, c0]).
using TaskDescriptor = std::vector<double>;

/// layer_sizes = [input_dim + d_b, hidden..., output_dim].
/// Weights ~ U(-s, s) with s = sqrt(6 / fan_in); biases and theta_b zero.
MlpParams init_mlp(const std::vector<std::size_t>& layer_sizes, std::size_t d_b, Rng& rng);

/// MLP over concat(x, theta_b per row). x: [batch x input_dim].
Tensor forward(const MlpParams& params, const Tensor& x);

/// MLP over concat(x, desc per row); requires an empty theta_b.
Tensor forward_conditioned(const MlpParams& params, const Tensor& x, const TaskDescriptor& desc);

/// Smallest |pre-activation| over every hidden unit and row, for keeping
/// numerical checks away from ReLU kinks. +inf when there are no hidden layers.
double min_abs_preactivation(const MlpParams& params, const Tensor& x);

/// Hidden width for a fixed parameter budget: floor(sqrt(target / (depth - 1)))
/// for depth >= 2. A single hidden layer uses 250 units, since matching the
/// budget with one layer (~20,000 units) trains poorly.
std::size_t depth_budget(std::size_t target_params, std::size_t n_hidden_layers);

// Checkpoint I/O. See docs/formats.md for the layout.
void write_checkpoint(std::ostream& os, const MlpParams& params);
MlpParams read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace gbml::models

#pragma once

// Feedforward network with tanh hidden layers and a linear output layer,
// the Adam optimizer, and the MFGNET text weights format.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mfg/autodiff.hpp"

namespace mfg {

using ad::Matrix;

struct Mlp {
  std::vector<int> layer_dims;   // [in, h1, ..., out]
  std::vector<Matrix> weights;   // layer l: dims[l] x dims[l+1]
  std::vector<Matrix> biases;    // layer l: 1 x dims[l+1]

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;

  // Parameter tensors in file order: W0, b0, W1, b1, ...
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  // Xavier-uniform weights, zero biases.
  static Mlp xavier(std::vector<int> dims, std::uint64_t seed);
  static Mlp zeros(std::vector<int> dims);

  // Plain batched evaluation, rows are samples.
  Matrix evaluate(const Matrix& input) const;

  bool operator==(const Mlp& o) const;
};

// Parameter leaves of one network on one tape, in tensors() order.
struct MlpLeaves {
  std::vector<ad::Var> tensors;
};

// trainable = false records the parameters as constants.
MlpLeaves bind(ad::Tape& tape, const Mlp& net, bool trainable = true);

// Records the network on the tape; input rows are samples.
ad::Var forward(ad::Tape& tape, const Mlp& net, const MlpLeaves& leaves,
                ad::Var input);
// Single input vector; binds the parameters as trainable leaves.
ad::Var forward(ad::Tape& tape, const Mlp& net, const std::vector<double>& input,
                MlpLeaves* leaves_out = nullptr);

std::vector<Matrix> gradients(const ad::Tape& tape, const MlpLeaves& leaves);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam descent step. Moments are allocated on first use.
void adam_step(const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads, AdamState& state);
void adam_step(Mlp& net, const std::vector<Matrix>& grads, AdamState& state);

// "MFGNET v1" / dims / one line per tensor, row-major, shortest round-trip
// decimal. Load throws ParseError (line, offset) or VersionError.
void save_weights(const Mlp& net, const std::filesystem::path& path);
Mlp load_weights(const std::filesystem::path& path);

}  // namespace mfg

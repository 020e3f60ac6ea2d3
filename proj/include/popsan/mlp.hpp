#pragma once

#include "popsan/checkpoint.hpp"
#include "popsan/common.hpp"
#include "popsan/optim.hpp"

#include <cstdint>
#include <vector>

namespace popsan {

/// Plain feedforward net: rectifier hidden layers, output either linear
/// (critic) or tanh (bounded baseline actor, scaled by the caller).
struct MLPParams {
  enum class Output { Linear, Tanh };

  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  Output output = Output::Linear;

  Index in_dim() const { return weights.front().cols(); }
  Index out_dim() const { return weights.back().rows(); }
};

MLPParams init_mlp(const std::vector<int>& sizes, MLPParams::Output output, std::uint64_t seed);

// Batched over columns.
MatrixXd mlp_forward(const MLPParams& params, const MatrixXd& input);

struct MLPTrace {
  std::vector<MatrixXd> inputs;   // input to each layer
  std::vector<MatrixXd> preacts;  // pre-activation of each layer
};

MatrixXd mlp_forward_trace(const MLPParams& params, const MatrixXd& input, MLPTrace& trace);

struct MLPGrads {
  std::vector<MatrixXd> d_weights;
  std::vector<VectorXd> d_biases;
};

/// Reverse pass; gradients are summed over batch columns. If g_input is
/// non-null it receives dL/dinput per column.
MLPGrads mlp_backward(const MLPParams& params, const MLPTrace& trace, const MatrixXd& g_out,
                      MatrixXd* g_input = nullptr);

std::vector<FlatView> tensor_views(MLPParams& params);
std::vector<ConstFlatView> tensor_views(const MLPGrads& grads);

void save_tensors(ckpt::TensorMap& map, const std::string& prefix, const MLPParams& params);
MLPParams load_mlp(const ckpt::TensorMap& map, const std::string& prefix);

// ---- critic on concatenated (obs, action) ----

double critic_forward(const MLPParams& params, const VectorXd& obs, const VectorXd& action);

struct CriticBackwardResult {
  MLPGrads grads;
  double loss = 0.0;
};

/// Gradients of the mean squared Bellman error (1/B) sum (q - y)^2.
CriticBackwardResult critic_backward(const MLPParams& params, const MatrixXd& obs,
                                     const MatrixXd& actions, const VectorXd& targets);

/// dQ/da per sample, [act_dim x B].
MatrixXd critic_action_grads(const MLPParams& params, const MatrixXd& obs,
                             const MatrixXd& actions);

}  // namespace popsan

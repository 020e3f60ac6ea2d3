#pragma once

#include "popsan/checkpoint.hpp"
#include "popsan/lif.hpp"
#include "popsan/optim.hpp"

#include <cstdint>
#include <vector>

namespace popsan {

/// Gaussian receptive fields, one population of pop_size neurons per
/// observation dimension.
struct EncoderParams {
  MatrixXd means;       // [obs_dim x pop_size]
  MatrixXd deviations;  // [obs_dim x pop_size], strictly positive
};

struct DecoderParams {
  MatrixXd weights;  // [act_dim x pop_size]
  VectorXd biases;   // [act_dim]
};

struct PopSANParams {
  EncoderParams encoder;
  std::vector<LayerParams> layers;  // K fully connected LIF layers
  DecoderParams decoder;
  LIFConfig lif;
  int timesteps = 5;
  int pop_size = 10;
  MatrixXd obs_ranges;  // [obs_dim x 2] (lo, hi); observations are clipped here

  Index obs_dim() const { return encoder.means.rows(); }
  Index act_dim() const { return decoder.weights.rows(); }
};

void validate(const PopSANParams& params);

struct EncodeResult {
  MatrixXd activation;                     // A_E [obs_dim x pop_size]
  std::vector<MatrixXd> spikes_per_t;      // T entries, binary
  std::vector<MatrixXd> potentials_per_t;  // accumulator value after each step
};

/// Gaussian activation A_E = exp(-(s - mu)^2 / (2 sigma^2)) followed by a
/// deterministic accumulate-and-fire spike train: e += A_E each step, spike
/// and subtract 1 when e reaches 1. Over T steps a neuron with A_E < 1 emits
/// floor(T*A_E) spikes and a neuron with A_E = 1 fires every step.
EncodeResult encode(const EncoderParams& params, const VectorXd& obs, int timesteps);

/// Firing rates fr = sc/T per output population, action a_i = W_d^(i).fr^(i) + b_d^(i).
VectorXd decode(const DecoderParams& params, const VectorXd& spike_counts, int timesteps);

struct ForwardTrace {
  VectorXd clipped_obs;
  MatrixXd encoder_activation;
  std::vector<MatrixXd> encoder_spikes_per_t;
  std::vector<MatrixXd> encoder_potentials_per_t;
  std::vector<std::vector<LayerState>> layer_states;  // [K][T]
  VectorXd spike_counts;  // output population spike totals, length act_dim*pop_size
  VectorXd firing_rates;
  VectorXd action;
};

struct ForwardResult {
  VectorXd action;
  ForwardTrace trace;
};

ForwardResult forward(const PopSANParams& params, const VectorXd& obs);

struct PopSANGradients {
  MatrixXd d_means;
  MatrixXd d_deviations;
  std::vector<LayerParams> d_layers;  // same shapes as the layer parameters
  MatrixXd d_decoder_weights;
  VectorXd d_decoder_biases;
};

/// Analytic gradients of a scalar loss given dL/da: chain rule through the
/// decoder, surrogate BPTT through the LIF layers, straight-through to the
/// Gaussian receptive fields.
PopSANGradients backward(const PopSANParams& params, const ForwardTrace& trace,
                         const VectorXd& grad_action);

/// Means placed at the centers of pop_size equal subintervals of each
/// observation range, deviations equal to the subinterval width.
PopSANParams init_popsan(int obs_dim, int act_dim, int pop_size,
                         const std::vector<int>& hidden_sizes, int timesteps,
                         const LIFConfig& lif, const MatrixXd& obs_ranges,
                         std::uint64_t seed);

/// One optimizer step; deviations are clamped to >= 1e-3 afterwards.
/// Non-finite gradients surface as std::runtime_error.
void apply_gradients(PopSANParams& params, const PopSANGradients& grads, Adam& opt,
                     double learning_rate);

// Ordered flat views over every trainable tensor (encoder, layers, decoder).
std::vector<FlatView> tensor_views(PopSANParams& params);
std::vector<ConstFlatView> tensor_views(const PopSANGradients& grads);
PopSANGradients zero_gradients(const PopSANParams& params);

// ---- batched column-per-sample path used by the training harness ----

struct BatchTrace {
  MatrixXd clipped_obs;  // [obs_dim x B]
  MatrixXd activation;   // [obs_dim*pop_size x B], flat index i*pop_size + j
  std::vector<MatrixXd> encoder_spikes;      // T of [obs_dim*pop_size x B]
  std::vector<MatrixXd> encoder_potentials;  // T of [obs_dim*pop_size x B]
  std::vector<std::vector<LayerStateBatch>> layers;  // [K][T]
  MatrixXd spike_counts;  // [act_dim*pop_size x B]
  MatrixXd firing_rates;
  MatrixXd actions;  // [act_dim x B]
};

BatchTrace forward_batch(const PopSANParams& params, const MatrixXd& obs);
PopSANGradients backward_batch(const PopSANParams& params, const BatchTrace& trace,
                               const MatrixXd& grad_actions);

// Checkpoint adapters. Stored self-describing: architecture, LIF constants,
// timesteps and observation ranges all round-trip.
void save_tensors(ckpt::TensorMap& map, const std::string& prefix, const PopSANParams& params);
PopSANParams load_popsan(const ckpt::TensorMap& map, const std::string& prefix);

}  // namespace popsan

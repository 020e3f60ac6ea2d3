#pragma once

#include "popsan/common.hpp"

#include <vector>

namespace popsan {

/// Current-based LIF neuron constants shared by a whole layer.
struct LIFConfig {
  double current_decay = 0.5;    // d_c
  double voltage_decay = 0.75;   // d_v
  double threshold = 0.5;        // v_th, must be > 0
  double surrogate_width = 0.5;  // width of the rectangular pseudo-derivative window
};

void validate(const LIFConfig& cfg);

struct LayerParams {
  MatrixXd weights;  // [fan_out x fan_in]
  VectorXd biases;   // [fan_out]

  Index fan_in() const { return weights.cols(); }
  Index fan_out() const { return weights.rows(); }
};

struct LayerState {
  VectorXd current;
  VectorXd voltage;
  VectorXd spikes;  // entries in {0, 1}

  static LayerState zero(Index fan_out);
};

struct LayerGradState {
  // Recurrence carriers at the earliest timestep after a full backward sweep.
  VectorXd g_current;
  VectorXd g_voltage;
  VectorXd g_spikes;
  // Aggregated over all timesteps.
  MatrixXd grad_weights;
  VectorXd grad_biases;
};

/// Rectangular surrogate z(v): 1/w inside the window |v - v_th| <= w/2
/// (boundary inclusive), 0 outside. Backward-pass pseudo-derivative of the
/// spike threshold.
double rect_surrogate(double voltage, const LIFConfig& cfg);

/// One LIF timestep:
///   c' = d_c*c + W*x + b
///   v' = d_v*v*(1 - o) + c'      (hard reset via the (1 - o) gate)
///   o' = 1 where v' >= v_th
LayerState lif_step(const LIFConfig& cfg, const LayerParams& params,
                    const LayerState& prev, const VectorXd& input_spikes);

struct LifBackwardResult {
  LayerGradState grads;
  MatrixXd g_input_spikes;   // [T x fan_in], gradient wrt the input spikes at each t
  MatrixXd g_current_per_t;  // [T x fan_out], dL/dc at each t
};

/// Backpropagation through time over a layer's state history. trace[t-1] is
/// the state after timestep t; input_history row t-1 feeds timestep t;
/// g_spikes_per_t row t-1 is dL/do arriving from above at timestep t.
LifBackwardResult lif_backward(const LIFConfig& cfg, const LayerParams& params,
                               const std::vector<LayerState>& trace,
                               const MatrixXd& input_history,
                               const MatrixXd& g_spikes_per_t);

// Column-per-sample batched variants used by the training harness. Semantics
// per column are identical to the single-sample ops.
struct LayerStateBatch {
  MatrixXd current;  // [fan_out x B]
  MatrixXd voltage;
  MatrixXd spikes;

  static LayerStateBatch zero(Index fan_out, Index batch);
};

LayerStateBatch lif_step_batch(const LIFConfig& cfg, const LayerParams& params,
                               const LayerStateBatch& prev, const MatrixXd& input_spikes);

struct LifBackwardBatchResult {
  MatrixXd grad_weights;  // summed over timesteps and batch columns
  VectorXd grad_biases;
  std::vector<MatrixXd> g_input_spikes;  // per t, [fan_in x B]
};

LifBackwardBatchResult lif_backward_batch(const LIFConfig& cfg, const LayerParams& params,
                                          const std::vector<LayerStateBatch>& trace,
                                          const std::vector<MatrixXd>& input_history,
                                          const std::vector<MatrixXd>& g_spikes_per_t);

}  // namespace popsan

#include "popsan/lif.hpp"

namespace popsan {

void validate(const LIFConfig& cfg) {
  check_arg(cfg.current_decay >= 0.0 && cfg.current_decay <= 1.0,
            "LIFConfig: current_decay must be in [0, 1]");
  check_arg(cfg.voltage_decay >= 0.0 && cfg.voltage_decay <= 1.0,
            "LIFConfig: voltage_decay must be in [0, 1]");
  check_arg(cfg.threshold > 0.0, "LIFConfig: threshold must be > 0");
  check_arg(cfg.surrogate_width > 0.0, "LIFConfig: surrogate_width must be > 0");
}

LayerState LayerState::zero(Index fan_out) {
  LayerState s;
  s.current = VectorXd::Zero(fan_out);
  s.voltage = VectorXd::Zero(fan_out);
  s.spikes = VectorXd::Zero(fan_out);
  return s;
}

LayerStateBatch LayerStateBatch::zero(Index fan_out, Index batch) {
  LayerStateBatch s;
  s.current = MatrixXd::Zero(fan_out, batch);
  s.voltage = MatrixXd::Zero(fan_out, batch);
  s.spikes = MatrixXd::Zero(fan_out, batch);
  return s;
}

double rect_surrogate(double voltage, const LIFConfig& cfg) {
  const double w = cfg.surrogate_width;
  return std::abs(voltage - cfg.threshold) <= w / 2.0 ? 1.0 / w : 0.0;
}

namespace {

void check_step_args(const LayerParams& params, Index prev_n, const MatrixXd& input_spikes) {
  check_arg(params.weights.rows() == params.biases.size(),
            "lif_step: weights/biases fan_out mismatch");
  check_arg(prev_n == params.fan_out(), "lif_step: prev state does not match fan_out");
  check_arg(input_spikes.rows() == params.fan_in(),
            "lif_step: input spikes do not match fan_in");
  check_arg(is_binary(input_spikes), "lif_step: input spikes must be 0 or 1");
}

}  // namespace

LayerState lif_step(const LIFConfig& cfg, const LayerParams& params,
                    const LayerState& prev, const VectorXd& input_spikes) {
  check_step_args(params, prev.current.size(), input_spikes);
  check_arg(prev.voltage.size() == prev.current.size() &&
                prev.spikes.size() == prev.current.size(),
            "lif_step: inconsistent prev state");

  LayerState next;
  next.current = cfg.current_decay * prev.current + params.weights * input_spikes + params.biases;
  next.voltage = cfg.voltage_decay * prev.voltage.cwiseProduct(VectorXd::Ones(prev.spikes.size()) - prev.spikes) +
                 next.current;
  next.spikes = (next.voltage.array() >= cfg.threshold).cast<double>();
  return next;
}

LayerStateBatch lif_step_batch(const LIFConfig& cfg, const LayerParams& params,
                               const LayerStateBatch& prev, const MatrixXd& input_spikes) {
  check_step_args(params, prev.current.rows(), input_spikes);
  check_arg(input_spikes.cols() == prev.current.cols(), "lif_step_batch: batch size mismatch");

  LayerStateBatch next;
  next.current = cfg.current_decay * prev.current + params.weights * input_spikes;
  next.current.colwise() += params.biases;
  next.voltage = cfg.voltage_decay * prev.voltage.cwiseProduct(
                     (1.0 - prev.spikes.array()).matrix()) +
                 next.current;
  next.spikes = (next.voltage.array() >= cfg.threshold).cast<double>();
  return next;
}

LifBackwardResult lif_backward(const LIFConfig& cfg, const LayerParams& params,
                               const std::vector<LayerState>& trace,
                               const MatrixXd& input_history,
                               const MatrixXd& g_spikes_per_t) {
  const Index T = static_cast<Index>(trace.size());
  const Index n_out = params.fan_out();
  const Index n_in = params.fan_in();
  check_arg(T >= 1, "lif_backward: empty trace");
  check_arg(input_history.rows() == T && input_history.cols() == n_in,
            "lif_backward: input_history shape mismatch");
  check_arg(g_spikes_per_t.rows() == T && g_spikes_per_t.cols() == n_out,
            "lif_backward: g_spikes_per_t shape mismatch");
  for (const auto& st : trace)
    check_arg(st.current.size() == n_out && st.voltage.size() == n_out &&
                  st.spikes.size() == n_out,
              "lif_backward: trace state shape mismatch");

  LifBackwardResult res;
  res.grads.grad_weights = MatrixXd::Zero(n_out, n_in);
  res.grads.grad_biases = VectorXd::Zero(n_out);
  res.g_input_spikes = MatrixXd::Zero(T, n_in);
  res.g_current_per_t = MatrixXd::Zero(T, n_out);

  VectorXd g_v_next = VectorXd::Zero(n_out);
  VectorXd g_c_next = VectorXd::Zero(n_out);
  VectorXd g_o(n_out), g_v(n_out), g_c(n_out);

  for (Index t = T - 1; t >= 0; --t) {
    const LayerState& st = trace[static_cast<size_t>(t)];
    // d v^(t+1) / d o^(t) = -d_v * v^(t)
    g_o = g_spikes_per_t.row(t).transpose() -
          cfg.voltage_decay * st.voltage.cwiseProduct(g_v_next);
    VectorXd z = st.voltage.unaryExpr(
        [&](double v) { return rect_surrogate(v, cfg); });
    g_v = g_o.cwiseProduct(z) +
          cfg.voltage_decay * (1.0 - st.spikes.array()).matrix().cwiseProduct(g_v_next);
    g_c = g_v + cfg.current_decay * g_c_next;

    res.grads.grad_weights += g_c * input_history.row(t);
    res.grads.grad_biases += g_c;
    res.g_input_spikes.row(t) = (params.weights.transpose() * g_c).transpose();
    res.g_current_per_t.row(t) = g_c.transpose();

    g_v_next = g_v;
    g_c_next = g_c;
  }

  res.grads.g_current = g_c_next;
  res.grads.g_voltage = g_v_next;
  res.grads.g_spikes = g_o;
  return res;
}

LifBackwardBatchResult lif_backward_batch(const LIFConfig& cfg, const LayerParams& params,
                                          const std::vector<LayerStateBatch>& trace,
                                          const std::vector<MatrixXd>& input_history,
                                          const std::vector<MatrixXd>& g_spikes_per_t) {
  const size_t T = trace.size();
  const Index n_out = params.fan_out();
  check_arg(T >= 1, "lif_backward_batch: empty trace");
  check_arg(input_history.size() == T && g_spikes_per_t.size() == T,
            "lif_backward_batch: history length mismatch");
  const Index B = trace[0].current.cols();

  LifBackwardBatchResult res;
  res.grad_weights = MatrixXd::Zero(n_out, params.fan_in());
  res.grad_biases = VectorXd::Zero(n_out);
  res.g_input_spikes.assign(T, MatrixXd());

  MatrixXd g_v_next = MatrixXd::Zero(n_out, B);
  MatrixXd g_c_next = MatrixXd::Zero(n_out, B);

  const double inv_w = 1.0 / cfg.surrogate_width;
  const double half_w = cfg.surrogate_width / 2.0;
  for (size_t ti = T; ti-- > 0;) {
    const LayerStateBatch& st = trace[ti];
    MatrixXd g_o = g_spikes_per_t[ti] - cfg.voltage_decay * st.voltage.cwiseProduct(g_v_next);
    MatrixXd z = ((st.voltage.array() - cfg.threshold).abs() <= half_w)
                     .cast<double>() * inv_w;
    MatrixXd g_v = g_o.cwiseProduct(z) +
                   cfg.voltage_decay * (1.0 - st.spikes.array()).matrix().cwiseProduct(g_v_next);
    MatrixXd g_c = g_v + cfg.current_decay * g_c_next;

    res.grad_weights.noalias() += g_c * input_history[ti].transpose();
    res.grad_biases += g_c.rowwise().sum();
    res.g_input_spikes[ti].noalias() = params.weights.transpose() * g_c;

    g_v_next = std::move(g_v);
    g_c_next = std::move(g_c);
  }
  return res;
}

}  // namespace popsan

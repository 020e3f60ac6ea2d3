#include "popsan/mlp.hpp"

#include "popsan/rng.hpp"

#include <cmath>
#include <random>

namespace popsan {

MLPParams init_mlp(const std::vector<int>& sizes, MLPParams::Output output, std::uint64_t seed) {
  check_arg(sizes.size() >= 2, "init_mlp: need at least input and output sizes");
  for (int s : sizes) check_arg(s >= 1, "init_mlp: sizes must be positive");

  MLPParams p;
  p.output = output;
  std::mt19937_64 rng(seed);
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    const double half = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    MatrixXd w(sizes[k + 1], sizes[k]);
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = uniform_sample(rng, -half, half);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(VectorXd::Zero(sizes[k + 1]));
  }
  return p;
}

MatrixXd mlp_forward(const MLPParams& params, const MatrixXd& input) {
  MLPTrace scratch;
  return mlp_forward_trace(params, input, scratch);
}

MatrixXd mlp_forward_trace(const MLPParams& params, const MatrixXd& input, MLPTrace& trace) {
  check_arg(!params.weights.empty(), "mlp: empty parameters");
  check_arg(input.rows() == params.in_dim(), "mlp: input dimension mismatch");
  trace.inputs.clear();
  trace.preacts.clear();

  MatrixXd x = input;
  for (size_t k = 0; k < params.weights.size(); ++k) {
    trace.inputs.push_back(x);
    MatrixXd z = params.weights[k] * x;
    z.colwise() += params.biases[k];
    trace.preacts.push_back(z);
    const bool last = k + 1 == params.weights.size();
    if (!last) {
      x = z.cwiseMax(0.0);
    } else if (params.output == MLPParams::Output::Tanh) {
      x = z.array().tanh().matrix();
    } else {
      x = std::move(z);
    }
  }
  return x;
}

MLPGrads mlp_backward(const MLPParams& params, const MLPTrace& trace, const MatrixXd& g_out,
                      MatrixXd* g_input) {
  const size_t L = params.weights.size();
  check_arg(trace.inputs.size() == L && trace.preacts.size() == L,
            "mlp_backward: trace does not match parameters");
  check_arg(g_out.rows() == params.out_dim(), "mlp_backward: output gradient mismatch");

  MLPGrads grads;
  grads.d_weights.resize(L);
  grads.d_biases.resize(L);

  MatrixXd g = g_out;
  for (size_t k = L; k-- > 0;) {
    const bool last = k + 1 == L;
    if (last && params.output == MLPParams::Output::Tanh) {
      MatrixXd t = trace.preacts[k].array().tanh().matrix();
      g = g.cwiseProduct((1.0 - t.array().square()).matrix());
    } else if (!last) {
      g = g.cwiseProduct((trace.preacts[k].array() > 0.0).cast<double>().matrix());
    }
    grads.d_weights[k].noalias() = g * trace.inputs[k].transpose();
    grads.d_biases[k] = g.rowwise().sum();
    if (k > 0 || g_input != nullptr) {
      MatrixXd gi = params.weights[k].transpose() * g;
      if (k == 0) {
        *g_input = std::move(gi);
      } else {
        g = std::move(gi);
      }
    }
  }
  return grads;
}

std::vector<FlatView> tensor_views(MLPParams& params) {
  std::vector<FlatView> views;
  for (size_t k = 0; k < params.weights.size(); ++k) {
    views.push_back(flat(params.weights[k]));
    views.push_back(flat(params.biases[k]));
  }
  return views;
}

std::vector<ConstFlatView> tensor_views(const MLPGrads& grads) {
  std::vector<ConstFlatView> views;
  for (size_t k = 0; k < grads.d_weights.size(); ++k) {
    views.push_back(cflat(grads.d_weights[k]));
    views.push_back(cflat(grads.d_biases[k]));
  }
  return views;
}

void save_tensors(ckpt::TensorMap& map, const std::string& prefix, const MLPParams& p) {
  map[prefix + "/num_layers"] = ckpt::from_scalar(static_cast<double>(p.weights.size()));
  map[prefix + "/output_kind"] =
      ckpt::from_scalar(p.output == MLPParams::Output::Tanh ? 1.0 : 0.0);
  for (size_t k = 0; k < p.weights.size(); ++k) {
    const std::string base = prefix + "/layer" + std::to_string(k);
    map[base + "/weights"] = ckpt::from_matrix(p.weights[k]);
    map[base + "/biases"] = ckpt::from_vector(p.biases[k]);
  }
}

MLPParams load_mlp(const ckpt::TensorMap& map, const std::string& prefix) {
  MLPParams p;
  const size_t n = static_cast<size_t>(ckpt::to_scalar(ckpt::get(map, prefix + "/num_layers")));
  p.output = ckpt::to_scalar(ckpt::get(map, prefix + "/output_kind")) == 1.0
                 ? MLPParams::Output::Tanh
                 : MLPParams::Output::Linear;
  for (size_t k = 0; k < n; ++k) {
    const std::string base = prefix + "/layer" + std::to_string(k);
    p.weights.push_back(ckpt::to_matrix(ckpt::get(map, base + "/weights")));
    p.biases.push_back(ckpt::to_vector(ckpt::get(map, base + "/biases")));
  }
  return p;
}

namespace {

MatrixXd concat_rows(const MatrixXd& a, const MatrixXd& b) {
  check_arg(a.cols() == b.cols(), "critic: obs/action batch size mismatch");
  MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace

double critic_forward(const MLPParams& params, const VectorXd& obs, const VectorXd& action) {
  check_arg(params.out_dim() == 1, "critic_forward: critic must have scalar output");
  MatrixXd in = concat_rows(obs, action);
  return mlp_forward(params, in)(0, 0);
}

CriticBackwardResult critic_backward(const MLPParams& params, const MatrixXd& obs,
                                     const MatrixXd& actions, const VectorXd& targets) {
  const Index B = obs.cols();
  check_arg(B >= 1, "critic_backward: empty batch");
  check_arg(targets.size() == B, "critic_backward: target count mismatch");
  check_runtime(targets.allFinite(), "critic_backward: non-finite targets");

  MLPTrace trace;
  MatrixXd q = mlp_forward_trace(params, concat_rows(obs, actions), trace);
  MatrixXd err = q - targets.transpose();

  CriticBackwardResult res;
  res.loss = err.array().square().sum() / static_cast<double>(B);
  MatrixXd g_out = 2.0 * err / static_cast<double>(B);
  res.grads = mlp_backward(params, trace, g_out);
  return res;
}

MatrixXd critic_action_grads(const MLPParams& params, const MatrixXd& obs,
                             const MatrixXd& actions) {
  MLPTrace trace;
  mlp_forward_trace(params, concat_rows(obs, actions), trace);
  MatrixXd g_out = MatrixXd::Ones(1, obs.cols());
  MatrixXd g_input;
  mlp_backward(params, trace, g_out, &g_input);
  return g_input.bottomRows(actions.rows());
}

}  // namespace popsan

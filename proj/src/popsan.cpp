#include "popsan/popsan.hpp"

#include "popsan/rng.hpp"

#include <cmath>
#include <random>

namespace popsan {

namespace {

// Flat population index: observation dim i, neuron j -> i*pop_size + j.
MatrixXd flatten_pop(const MatrixXd& per_dim) {
  MatrixXd out(per_dim.rows() * per_dim.cols(), 1);
  Index r = 0;
  for (Index i = 0; i < per_dim.rows(); ++i)
    for (Index j = 0; j < per_dim.cols(); ++j) out(r++, 0) = per_dim(i, j);
  return out;
}

MatrixXd unflatten_pop(const Eigen::Ref<const MatrixXd>& flat_col, Index dims, Index pop) {
  MatrixXd out(dims, pop);
  Index r = 0;
  for (Index i = 0; i < dims; ++i)
    for (Index j = 0; j < pop; ++j) out(i, j) = flat_col(r++, 0);
  return out;
}

struct FlatEncode {
  MatrixXd activation;                // [obs_dim*pop x B]
  std::vector<MatrixXd> spikes;      // T of [obs_dim*pop x B]
  std::vector<MatrixXd> potentials;  // T of [obs_dim*pop x B]
};

FlatEncode encode_flat(const EncoderParams& enc, const MatrixXd& obs, int timesteps) {
  const Index obs_dim = enc.means.rows();
  const Index pop = enc.means.cols();
  const Index B = obs.cols();

  FlatEncode res;
  res.activation.resize(obs_dim * pop, B);
  for (Index i = 0; i < obs_dim; ++i) {
    for (Index j = 0; j < pop; ++j) {
      const double mu = enc.means(i, j);
      const double sigma = enc.deviations(i, j);
      res.activation.row(i * pop + j) =
          (-(obs.row(i).array() - mu).square() / (2.0 * sigma * sigma)).exp();
    }
  }

  MatrixXd potential = MatrixXd::Zero(obs_dim * pop, B);
  for (int t = 0; t < timesteps; ++t) {
    potential += res.activation;
    MatrixXd spike = (potential.array() >= 1.0).cast<double>();
    potential -= spike;
    res.spikes.push_back(spike);
    res.potentials.push_back(potential);
  }
  return res;
}

void check_obs(const EncoderParams& enc, const MatrixXd& obs) {
  check_arg(obs.rows() == enc.means.rows(), "encode: observation dimension mismatch");
  check_arg(obs.allFinite(), "encode: observation must be finite");
}

MatrixXd clip_to_ranges(const MatrixXd& obs, const MatrixXd& ranges) {
  MatrixXd out = obs;
  for (Index i = 0; i < out.rows(); ++i)
    out.row(i) = out.row(i).cwiseMax(ranges(i, 0)).cwiseMin(ranges(i, 1));
  return out;
}

}  // namespace

void validate(const PopSANParams& params) {
  validate(params.lif);
  check_arg(params.timesteps >= 1, "PopSANParams: timesteps must be >= 1");
  check_arg(params.pop_size >= 1, "PopSANParams: pop_size must be >= 1");
  check_arg(params.encoder.means.rows() == params.encoder.deviations.rows() &&
                params.encoder.means.cols() == params.encoder.deviations.cols(),
            "PopSANParams: encoder shape mismatch");
  check_arg(params.encoder.means.cols() == params.pop_size,
            "PopSANParams: encoder pop_size mismatch");
  check_arg((params.encoder.deviations.array() > 0.0).all(),
            "PopSANParams: deviations must be positive");
  check_arg(!params.layers.empty(), "PopSANParams: need at least one LIF layer");
  const Index in = params.obs_dim() * params.pop_size;
  check_arg(params.layers.front().fan_in() == in,
            "PopSANParams: first layer fan_in must be obs_dim*pop_size");
  for (size_t k = 0; k + 1 < params.layers.size(); ++k)
    check_arg(params.layers[k].fan_out() == params.layers[k + 1].fan_in(),
              "PopSANParams: consecutive layer shapes must compose");
  check_arg(params.layers.back().fan_out() == params.act_dim() * params.pop_size,
            "PopSANParams: last layer fan_out must be act_dim*pop_size");
  check_arg(params.obs_ranges.rows() == params.obs_dim() && params.obs_ranges.cols() == 2,
            "PopSANParams: obs_ranges must be [obs_dim x 2]");
  for (const auto& l : params.layers)
    check_arg(all_finite(l.weights) && l.biases.allFinite(), "PopSANParams: non-finite layer");
}

EncodeResult encode(const EncoderParams& params, const VectorXd& obs, int timesteps) {
  check_obs(params, obs);
  check_arg(timesteps >= 1, "encode: timesteps must be >= 1");
  FlatEncode flat = encode_flat(params, obs, timesteps);

  EncodeResult res;
  const Index dims = params.means.rows();
  const Index pop = params.means.cols();
  res.activation = unflatten_pop(flat.activation, dims, pop);
  for (int t = 0; t < timesteps; ++t) {
    res.spikes_per_t.push_back(unflatten_pop(flat.spikes[static_cast<size_t>(t)], dims, pop));
    res.potentials_per_t.push_back(
        unflatten_pop(flat.potentials[static_cast<size_t>(t)], dims, pop));
  }
  return res;
}

VectorXd decode(const DecoderParams& params, const VectorXd& spike_counts, int timesteps) {
  const Index act_dim = params.weights.rows();
  const Index pop = params.weights.cols();
  check_arg(spike_counts.size() == act_dim * pop, "decode: spike count length mismatch");
  check_arg(timesteps >= 1, "decode: timesteps must be >= 1");
  check_arg((spike_counts.array() >= 0.0).all() &&
                (spike_counts.array() <= static_cast<double>(timesteps)).all(),
            "decode: spike counts must lie in [0, T]");

  VectorXd action(act_dim);
  for (Index i = 0; i < act_dim; ++i) {
    double a = params.biases(i);
    for (Index j = 0; j < pop; ++j)
      a += params.weights(i, j) * spike_counts(i * pop + j) / static_cast<double>(timesteps);
    action(i) = a;
  }
  return action;
}

BatchTrace forward_batch(const PopSANParams& params, const MatrixXd& obs) {
  validate(params);
  check_obs(params.encoder, obs);
  const Index B = obs.cols();
  const int T = params.timesteps;
  const size_t K = params.layers.size();

  BatchTrace trace;
  trace.clipped_obs = clip_to_ranges(obs, params.obs_ranges);
  FlatEncode enc = encode_flat(params.encoder, trace.clipped_obs, T);
  trace.activation = std::move(enc.activation);
  trace.encoder_spikes = std::move(enc.spikes);
  trace.encoder_potentials = std::move(enc.potentials);

  trace.layers.resize(K);
  std::vector<LayerStateBatch> state;
  state.reserve(K);
  for (const auto& l : params.layers) state.push_back(LayerStateBatch::zero(l.fan_out(), B));

  for (int t = 0; t < T; ++t) {
    const MatrixXd* input = &trace.encoder_spikes[static_cast<size_t>(t)];
    for (size_t k = 0; k < K; ++k) {
      state[k] = lif_step_batch(params.lif, params.layers[k], state[k], *input);
      trace.layers[k].push_back(state[k]);
      input = &trace.layers[k].back().spikes;
    }
  }

  trace.spike_counts = MatrixXd::Zero(params.layers.back().fan_out(), B);
  for (int t = 0; t < T; ++t) trace.spike_counts += trace.layers[K - 1][static_cast<size_t>(t)].spikes;
  trace.firing_rates = trace.spike_counts / static_cast<double>(T);

  trace.actions.resize(params.act_dim(), B);
  for (Index b = 0; b < B; ++b)
    trace.actions.col(b) = decode(params.decoder, trace.spike_counts.col(b), T);
  return trace;
}

ForwardResult forward(const PopSANParams& params, const VectorXd& obs) {
  BatchTrace bt = forward_batch(params, obs);
  const Index dims = params.obs_dim();
  const Index pop = params.pop_size;
  const int T = params.timesteps;

  ForwardTrace trace;
  trace.clipped_obs = bt.clipped_obs.col(0);
  trace.encoder_activation = unflatten_pop(bt.activation, dims, pop);
  for (int t = 0; t < T; ++t) {
    trace.encoder_spikes_per_t.push_back(
        unflatten_pop(bt.encoder_spikes[static_cast<size_t>(t)], dims, pop));
    trace.encoder_potentials_per_t.push_back(
        unflatten_pop(bt.encoder_potentials[static_cast<size_t>(t)], dims, pop));
  }
  trace.layer_states.resize(params.layers.size());
  for (size_t k = 0; k < params.layers.size(); ++k) {
    for (int t = 0; t < T; ++t) {
      const LayerStateBatch& sb = bt.layers[k][static_cast<size_t>(t)];
      LayerState s;
      s.current = sb.current.col(0);
      s.voltage = sb.voltage.col(0);
      s.spikes = sb.spikes.col(0);
      trace.layer_states[k].push_back(std::move(s));
    }
  }
  trace.spike_counts = bt.spike_counts.col(0);
  trace.firing_rates = bt.firing_rates.col(0);
  trace.action = bt.actions.col(0);
  return ForwardResult{trace.action, std::move(trace)};
}

namespace {

BatchTrace to_batch_trace(const PopSANParams& params, const ForwardTrace& trace) {
  BatchTrace bt;
  bt.clipped_obs = trace.clipped_obs;
  bt.activation = flatten_pop(trace.encoder_activation);
  for (const auto& s : trace.encoder_spikes_per_t) bt.encoder_spikes.push_back(flatten_pop(s));
  for (const auto& p : trace.encoder_potentials_per_t)
    bt.encoder_potentials.push_back(flatten_pop(p));
  bt.layers.resize(trace.layer_states.size());
  for (size_t k = 0; k < trace.layer_states.size(); ++k) {
    for (const auto& s : trace.layer_states[k]) {
      LayerStateBatch sb;
      sb.current = s.current;
      sb.voltage = s.voltage;
      sb.spikes = s.spikes;
      bt.layers[k].push_back(std::move(sb));
    }
  }
  bt.spike_counts = trace.spike_counts;
  bt.firing_rates = trace.firing_rates;
  bt.actions = trace.action;
  (void)params;
  return bt;
}

}  // namespace

PopSANGradients backward(const PopSANParams& params, const ForwardTrace& trace,
                         const VectorXd& grad_action) {
  return backward_batch(params, to_batch_trace(params, trace), grad_action);
}

PopSANGradients backward_batch(const PopSANParams& params, const BatchTrace& trace,
                               const MatrixXd& grad_actions) {
  validate(params);
  const int T = params.timesteps;
  const size_t K = params.layers.size();
  const Index pop = params.pop_size;
  const Index B = grad_actions.cols();
  check_arg(grad_actions.rows() == params.act_dim(), "backward: grad_action dimension mismatch");
  check_arg(static_cast<int>(trace.encoder_spikes.size()) == T &&
                trace.layers.size() == K &&
                static_cast<int>(trace.layers[0].size()) == T &&
                trace.clipped_obs.cols() == B && trace.firing_rates.cols() == B,
            "backward: trace does not match params/batch");

  PopSANGradients grads = zero_gradients(params);

  // Decoder: dL/dW_d^(i) = dL/da_i * fr^(i), dL/db_d^(i) = dL/da_i.
  for (Index i = 0; i < params.act_dim(); ++i)
    grads.d_decoder_weights.row(i) =
        (trace.firing_rates.middleRows(i * pop, pop) * grad_actions.row(i).transpose())
            .transpose();
  grads.d_decoder_biases = grad_actions.rowwise().sum();

  // Output population spike gradient, identical at every timestep: the firing
  // rate is a mean over T, so dL/do^(t) = (W_d^T dL/da) / T.
  MatrixXd g_out(params.layers.back().fan_out(), B);
  for (Index i = 0; i < params.act_dim(); ++i)
    for (Index j = 0; j < pop; ++j)
      g_out.row(i * pop + j) =
          grad_actions.row(i) * (params.decoder.weights(i, j) / static_cast<double>(T));

  std::vector<MatrixXd> upstream(static_cast<size_t>(T), g_out);
  for (size_t k = K; k-- > 0;) {
    std::vector<MatrixXd> inputs;
    inputs.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
      inputs.push_back(k == 0 ? trace.encoder_spikes[static_cast<size_t>(t)]
                              : trace.layers[k - 1][static_cast<size_t>(t)].spikes);
    auto res = lif_backward_batch(params.lif, params.layers[k], trace.layers[k], inputs,
                                  upstream);
    grads.d_layers[k].weights = std::move(res.grad_weights);
    grads.d_layers[k].biases = std::move(res.grad_biases);
    upstream = std::move(res.g_input_spikes);
  }

  // Encoder, straight-through: dX^(t)/dA_E = 1, so the A_E gradient is the
  // sum of the per-timestep spike gradients; then the Gaussian derivatives.
  MatrixXd g_act = MatrixXd::Zero(params.obs_dim() * pop, B);
  for (const auto& g : upstream) g_act += g;
  for (Index i = 0; i < params.obs_dim(); ++i) {
    for (Index j = 0; j < pop; ++j) {
      const Index r = i * pop + j;
      const double mu = params.encoder.means(i, j);
      const double sigma = params.encoder.deviations(i, j);
      Eigen::ArrayXd diff = trace.clipped_obs.row(i).transpose().array() - mu;
      Eigen::ArrayXd common =
          g_act.row(r).transpose().array() * trace.activation.row(r).transpose().array();
      grads.d_means(i, j) = (common * diff / (sigma * sigma)).sum();
      grads.d_deviations(i, j) = (common * diff.square() / (sigma * sigma * sigma)).sum();
    }
  }
  return grads;
}

PopSANParams init_popsan(int obs_dim, int act_dim, int pop_size,
                         const std::vector<int>& hidden_sizes, int timesteps,
                         const LIFConfig& lif, const MatrixXd& obs_ranges,
                         std::uint64_t seed) {
  check_arg(obs_dim >= 1 && act_dim >= 1, "init_popsan: dimensions must be positive");
  check_arg(pop_size >= 2, "init_popsan: pop_size must be >= 2");
  check_arg(timesteps >= 1, "init_popsan: timesteps must be >= 1");
  validate(lif);
  check_arg(obs_ranges.rows() == obs_dim && obs_ranges.cols() == 2,
            "init_popsan: obs_ranges must be [obs_dim x 2]");
  check_arg(obs_ranges.allFinite(), "init_popsan: obs_ranges must be finite");
  for (Index i = 0; i < obs_ranges.rows(); ++i)
    check_arg(obs_ranges(i, 0) < obs_ranges(i, 1), "init_popsan: range lo must be < hi");
  for (int h : hidden_sizes) check_arg(h >= 1, "init_popsan: hidden sizes must be positive");

  PopSANParams p;
  p.lif = lif;
  p.timesteps = timesteps;
  p.pop_size = pop_size;
  p.obs_ranges = obs_ranges;

  p.encoder.means.resize(obs_dim, pop_size);
  p.encoder.deviations.resize(obs_dim, pop_size);
  for (Index i = 0; i < obs_dim; ++i) {
    const double lo = obs_ranges(i, 0), hi = obs_ranges(i, 1);
    const double width = (hi - lo) / static_cast<double>(pop_size);
    for (Index j = 0; j < pop_size; ++j) {
      p.encoder.means(i, j) = lo + (static_cast<double>(j) + 0.5) * width;
      p.encoder.deviations(i, j) = width;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<Index> sizes;
  sizes.push_back(static_cast<Index>(obs_dim) * pop_size);
  for (int h : hidden_sizes) sizes.push_back(h);
  sizes.push_back(static_cast<Index>(act_dim) * pop_size);
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    LayerParams layer;
    const double half = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    layer.weights.resize(sizes[k + 1], sizes[k]);
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j)
        layer.weights(i, j) = uniform_sample(rng, -half, half);
    layer.biases = VectorXd::Zero(sizes[k + 1]);
    p.layers.push_back(std::move(layer));
  }

  const double dec_half = 1.0 / std::sqrt(static_cast<double>(pop_size));
  p.decoder.weights.resize(act_dim, pop_size);
  for (Index i = 0; i < act_dim; ++i)
    for (Index j = 0; j < pop_size; ++j)
      p.decoder.weights(i, j) = uniform_sample(rng, -dec_half, dec_half);
  p.decoder.biases = VectorXd::Zero(act_dim);

  validate(p);
  return p;
}

std::vector<FlatView> tensor_views(PopSANParams& params) {
  std::vector<FlatView> views;
  views.push_back(flat(params.encoder.means));
  views.push_back(flat(params.encoder.deviations));
  for (auto& l : params.layers) {
    views.push_back(flat(l.weights));
    views.push_back(flat(l.biases));
  }
  views.push_back(flat(params.decoder.weights));
  views.push_back(flat(params.decoder.biases));
  return views;
}

std::vector<ConstFlatView> tensor_views(const PopSANGradients& grads) {
  std::vector<ConstFlatView> views;
  views.push_back(cflat(grads.d_means));
  views.push_back(cflat(grads.d_deviations));
  for (const auto& l : grads.d_layers) {
    views.push_back(cflat(l.weights));
    views.push_back(cflat(l.biases));
  }
  views.push_back(cflat(grads.d_decoder_weights));
  views.push_back(cflat(grads.d_decoder_biases));
  return views;
}

PopSANGradients zero_gradients(const PopSANParams& params) {
  PopSANGradients g;
  g.d_means = MatrixXd::Zero(params.encoder.means.rows(), params.encoder.means.cols());
  g.d_deviations = g.d_means;
  for (const auto& l : params.layers) {
    LayerParams zl;
    zl.weights = MatrixXd::Zero(l.fan_out(), l.fan_in());
    zl.biases = VectorXd::Zero(l.fan_out());
    g.d_layers.push_back(std::move(zl));
  }
  g.d_decoder_weights = MatrixXd::Zero(params.decoder.weights.rows(), params.decoder.weights.cols());
  g.d_decoder_biases = VectorXd::Zero(params.decoder.biases.size());
  return g;
}

void apply_gradients(PopSANParams& params, const PopSANGradients& grads, Adam& opt,
                     double learning_rate) {
  check_arg(grads.d_layers.size() == params.layers.size(), "apply_gradients: layer count mismatch");
  auto gviews = tensor_views(grads);
  for (const auto& g : gviews)
    check_runtime(g.allFinite(), "apply_gradients: non-finite gradient");
  opt.step(tensor_views(params), gviews, learning_rate);
  params.encoder.deviations = params.encoder.deviations.cwiseMax(1e-3);
}

void save_tensors(ckpt::TensorMap& map, const std::string& prefix, const PopSANParams& p) {
  map[prefix + "/means"] = ckpt::from_matrix(p.encoder.means);
  map[prefix + "/deviations"] = ckpt::from_matrix(p.encoder.deviations);
  map[prefix + "/num_layers"] = ckpt::from_scalar(static_cast<double>(p.layers.size()));
  for (size_t k = 0; k < p.layers.size(); ++k) {
    const std::string base = prefix + "/layer" + std::to_string(k);
    map[base + "/weights"] = ckpt::from_matrix(p.layers[k].weights);
    map[base + "/biases"] = ckpt::from_vector(p.layers[k].biases);
  }
  map[prefix + "/decoder/weights"] = ckpt::from_matrix(p.decoder.weights);
  map[prefix + "/decoder/biases"] = ckpt::from_vector(p.decoder.biases);
  VectorXd lif(4);
  lif << p.lif.current_decay, p.lif.voltage_decay, p.lif.threshold, p.lif.surrogate_width;
  map[prefix + "/lif"] = ckpt::from_vector(lif);
  map[prefix + "/timesteps"] = ckpt::from_scalar(static_cast<double>(p.timesteps));
  map[prefix + "/pop_size"] = ckpt::from_scalar(static_cast<double>(p.pop_size));
  map[prefix + "/obs_ranges"] = ckpt::from_matrix(p.obs_ranges);
}

PopSANParams load_popsan(const ckpt::TensorMap& map, const std::string& prefix) {
  PopSANParams p;
  p.encoder.means = ckpt::to_matrix(ckpt::get(map, prefix + "/means"));
  p.encoder.deviations = ckpt::to_matrix(ckpt::get(map, prefix + "/deviations"));
  const size_t num_layers =
      static_cast<size_t>(ckpt::to_scalar(ckpt::get(map, prefix + "/num_layers")));
  for (size_t k = 0; k < num_layers; ++k) {
    const std::string base = prefix + "/layer" + std::to_string(k);
    LayerParams l;
    l.weights = ckpt::to_matrix(ckpt::get(map, base + "/weights"));
    l.biases = ckpt::to_vector(ckpt::get(map, base + "/biases"));
    p.layers.push_back(std::move(l));
  }
  p.decoder.weights = ckpt::to_matrix(ckpt::get(map, prefix + "/decoder/weights"));
  p.decoder.biases = ckpt::to_vector(ckpt::get(map, prefix + "/decoder/biases"));
  VectorXd lif = ckpt::to_vector(ckpt::get(map, prefix + "/lif"));
  check_runtime(lif.size() == 4, "checkpoint: bad lif tensor");
  p.lif = LIFConfig{lif(0), lif(1), lif(2), lif(3)};
  p.timesteps = static_cast<int>(ckpt::to_scalar(ckpt::get(map, prefix + "/timesteps")));
  p.pop_size = static_cast<int>(ckpt::to_scalar(ckpt::get(map, prefix + "/pop_size")));
  p.obs_ranges = ckpt::to_matrix(ckpt::get(map, prefix + "/obs_ranges"));
  validate(p);
  return p;
}

}  // namespace popsan

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "autodiff_ref.hpp"
#include "popsan/lif.hpp"
#include "popsan/rng.hpp"

#include <random>
#include <vector>

using namespace popsan;

namespace {

LIFConfig default_cfg() { return LIFConfig{0.5, 0.75, 0.5, 0.5}; }

struct RandomLayerCase {
  LIFConfig cfg;
  LayerParams params;
  std::vector<VectorXd> inputs;       // T binary input vectors
  std::vector<LayerState> trace;      // states after each timestep
  MatrixXd input_history;             // [T x fan_in]
  MatrixXd g_spikes;                  // [T x fan_out]
};

RandomLayerCase make_random_case(std::mt19937_64& rng, Index fan_in, Index fan_out, Index T) {
  RandomLayerCase c;
  c.cfg = default_cfg();
  c.cfg.surrogate_width = uniform_sample(rng, 0.3, 1.0);
  c.cfg.current_decay = uniform_sample(rng, 0.1, 0.9);
  c.cfg.voltage_decay = uniform_sample(rng, 0.1, 0.9);

  c.params.weights = MatrixXd::NullaryExpr(fan_out, fan_in,
                                           [&]() { return uniform_sample(rng, -1.0, 1.0); });
  c.params.biases = VectorXd::NullaryExpr(fan_out, [&]() { return uniform_sample(rng, -0.3, 0.3); });

  LayerState st = LayerState::zero(fan_out);
  c.input_history = MatrixXd::Zero(T, fan_in);
  c.g_spikes = MatrixXd::Zero(T, fan_out);
  for (Index t = 0; t < T; ++t) {
    VectorXd x = VectorXd::NullaryExpr(fan_in, [&]() {
      return uniform_sample(rng, 0.0, 1.0) < 0.5 ? 1.0 : 0.0;
    });
    c.inputs.push_back(x);
    c.input_history.row(t) = x.transpose();
    st = lif_step(c.cfg, c.params, st, x);
    c.trace.push_back(st);
    for (Index i = 0; i < fan_out; ++i) c.g_spikes(t, i) = uniform_sample(rng, -1.0, 1.0);
  }
  return c;
}

// Unrolled-graph oracle for a single LIF layer: weights, biases and inputs
// are leaves; loss = sum_t <g_spikes[t], o^(t)>.
struct LayerGraph {
  ref::Tape tape;
  std::vector<std::vector<int>> w;  // [fan_out][fan_in]
  std::vector<int> b;
  std::vector<std::vector<int>> x;  // [T][fan_in]
  int loss = -1;
};

LayerGraph build_layer_graph(const RandomLayerCase& c) {
  LayerGraph g;
  const Index fan_out = c.params.fan_out();
  const Index fan_in = c.params.fan_in();
  const Index T = static_cast<Index>(c.trace.size());

  g.w.assign(fan_out, std::vector<int>(fan_in));
  for (Index i = 0; i < fan_out; ++i)
    for (Index j = 0; j < fan_in; ++j) g.w[i][j] = g.tape.leaf(c.params.weights(i, j));
  g.b.resize(fan_out);
  for (Index i = 0; i < fan_out; ++i) g.b[i] = g.tape.leaf(c.params.biases(i));
  g.x.assign(T, std::vector<int>(fan_in));
  for (Index t = 0; t < T; ++t)
    for (Index j = 0; j < fan_in; ++j) g.x[t][j] = g.tape.leaf(c.input_history(t, j));

  std::vector<int> cur(fan_out), vol(fan_out), spk(fan_out);
  for (Index i = 0; i < fan_out; ++i) {
    cur[i] = g.tape.leaf(0.0);
    vol[i] = g.tape.leaf(0.0);
    spk[i] = g.tape.leaf(0.0);
  }

  std::vector<int> loss_terms;
  for (Index t = 0; t < T; ++t) {
    std::vector<int> cur2(fan_out), vol2(fan_out), spk2(fan_out);
    for (Index i = 0; i < fan_out; ++i) {
      int drive = g.b[i];
      for (Index j = 0; j < fan_in; ++j)
        drive = g.tape.add(drive, g.tape.mul(g.w[i][j], g.x[t][j]));
      cur2[i] = g.tape.add(g.tape.scale(cur[i], c.cfg.current_decay), drive);
      int gate = g.tape.shift(g.tape.neg(spk[i]), 1.0);  // 1 - o
      vol2[i] = g.tape.add(
          g.tape.scale(g.tape.mul(vol[i], gate), c.cfg.voltage_decay), cur2[i]);
      spk2[i] = g.tape.threshold(vol2[i], c.cfg.threshold, c.cfg.surrogate_width);
      loss_terms.push_back(g.tape.scale(spk2[i], c.g_spikes(t, i)));
    }
    cur = cur2;
    vol = vol2;
    spk = spk2;
  }
  g.loss = g.tape.sum(loss_terms);
  return g;
}

}  // namespace

TEST_CASE("lif_step hand-derived example") {
  LIFConfig cfg = default_cfg();
  LayerParams p;
  p.weights = MatrixXd::Constant(1, 1, 1.0);
  p.biases = VectorXd::Zero(1);

  // t=1: unit drive into a zero state
  LayerState s0 = LayerState::zero(1);
  VectorXd one = VectorXd::Ones(1);
  LayerState s1 = lif_step(cfg, p, s0, one);
  CHECK(s1.current(0) == 1.0);
  CHECK(s1.voltage(0) == 1.0);
  CHECK(s1.spikes(0) == 1.0);

  // t=2: no drive, current decays, reset gate wipes the voltage carry
  VectorXd zero = VectorXd::Zero(1);
  LayerState s2 = lif_step(cfg, p, s1, zero);
  CHECK(s2.current(0) == 0.5);
  CHECK(s2.voltage(0) == 0.5);
  CHECK(s2.spikes(0) == 1.0);  // 0.5 >= v_th
}

TEST_CASE("lif_step zero dynamics") {
  LIFConfig cfg = default_cfg();
  LayerParams p;
  p.weights = MatrixXd::Zero(3, 2);
  p.biases = VectorXd::Zero(3);
  LayerState s = LayerState::zero(3);
  VectorXd x(2);
  x << 1.0, 0.0;
  LayerState n = lif_step(cfg, p, s, x);
  CHECK(n.current.isZero(0));
  CHECK(n.voltage.isZero(0));
  CHECK(n.spikes.isZero(0));
}

TEST_CASE("lif_step contract violations") {
  LIFConfig cfg = default_cfg();
  LayerParams p;
  p.weights = MatrixXd::Zero(2, 3);
  p.biases = VectorXd::Zero(2);
  LayerState s = LayerState::zero(2);

  VectorXd bad_shape = VectorXd::Zero(4);
  CHECK_THROWS_AS(lif_step(cfg, p, s, bad_shape), std::invalid_argument);

  VectorXd non_binary(3);
  non_binary << 0.0, 0.5, 1.0;
  CHECK_THROWS_AS(lif_step(cfg, p, s, non_binary), std::invalid_argument);

  LayerState wrong = LayerState::zero(5);
  CHECK_THROWS_AS(lif_step(cfg, p, wrong, VectorXd::Zero(3).eval()), std::invalid_argument);
}

TEST_CASE("LIFConfig validation") {
  LIFConfig ok = default_cfg();
  CHECK_NOTHROW(validate(ok));
  LIFConfig bad = ok;
  bad.current_decay = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.threshold = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ok;
  bad.surrogate_width = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("rect_surrogate window") {
  LIFConfig cfg = default_cfg();  // v_th 0.5, w 0.5
  CHECK(rect_surrogate(cfg.threshold, cfg) == 2.0);
  CHECK(rect_surrogate(cfg.threshold + 10.0 * cfg.surrogate_width, cfg) == 0.0);
  // boundary inclusive on both sides
  CHECK(rect_surrogate(cfg.threshold - cfg.surrogate_width / 2.0, cfg) == 2.0);
  CHECK(rect_surrogate(cfg.threshold + cfg.surrogate_width / 2.0, cfg) == 2.0);
}

TEST_CASE("lif_backward single timestep hand chain rule") {
  LIFConfig cfg = default_cfg();
  LayerParams p;
  p.weights = MatrixXd::Constant(1, 1, 0.5);
  p.biases = VectorXd::Zero(1);

  LayerState s0 = LayerState::zero(1);
  VectorXd one = VectorXd::Ones(1);
  // pick bias so v lands exactly on the threshold
  p.biases(0) = 0.0;
  p.weights(0, 0) = cfg.threshold;  // v^(1) = v_th -> spike, z = 1/w = 2
  LayerState s1 = lif_step(cfg, p, s0, one);
  REQUIRE(s1.spikes(0) == 1.0);

  MatrixXd xh(1, 1);
  xh << 1.0;
  MatrixXd gs(1, 1);
  gs << 1.0;
  auto res = lif_backward(cfg, p, {s1}, xh, gs);
  CHECK(res.grads.grad_weights(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.grads.grad_biases(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("lif_backward zero upstream gradient") {
  std::mt19937_64 rng(7);
  auto c = make_random_case(rng, 3, 2, 4);
  c.g_spikes.setZero();
  auto res = lif_backward(c.cfg, c.params, c.trace, c.input_history, c.g_spikes);
  CHECK(res.grads.grad_weights.isZero(0));
  CHECK(res.grads.grad_biases.isZero(0));
  CHECK(res.g_input_spikes.isZero(0));
}

TEST_CASE("lif_backward matches unrolled-graph oracle over random cases") {
  std::mt19937_64 rng(12345);
  int checked = 0;
  for (int it = 0; it < 120; ++it) {
    const Index fan_in = 1 + static_cast<Index>(rng() % 4);
    const Index fan_out = 1 + static_cast<Index>(rng() % 4);
    const Index T = 1 + static_cast<Index>(rng() % 4);
    auto c = make_random_case(rng, fan_in, fan_out, T);
    auto res = lif_backward(c.cfg, c.params, c.trace, c.input_history, c.g_spikes);

    auto g = build_layer_graph(c);
    g.tape.backward(g.loss);

    for (Index i = 0; i < fan_out; ++i) {
      for (Index j = 0; j < fan_in; ++j)
        CHECK(ref::close_rel(res.grads.grad_weights(i, j), g.tape.grad(g.w[i][j]), 1e-10));
      CHECK(ref::close_rel(res.grads.grad_biases(i), g.tape.grad(g.b[i]), 1e-10));
    }
    for (Index t = 0; t < T; ++t)
      for (Index j = 0; j < fan_in; ++j)
        CHECK(ref::close_rel(res.g_input_spikes(t, j), g.tape.grad(g.x[t][j]), 1e-10));
    ++checked;
  }
  CHECK(checked == 120);
}

TEST_CASE("property: spikes stay binary and above threshold at fire time") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 50; ++it) {
    auto c = make_random_case(rng, 4, 4, 4);
    for (const auto& st : c.trace) {
      CHECK(is_binary(st.spikes));
      for (Index i = 0; i < st.spikes.size(); ++i)
        if (st.spikes(i) == 1.0) CHECK(st.voltage(i) >= c.cfg.threshold);
    }
  }
}

TEST_CASE("property: determinism of repeated simulation") {
  std::mt19937_64 rng(4);
  auto c = make_random_case(rng, 3, 3, 4);
  LayerState st = LayerState::zero(3);
  std::vector<LayerState> again;
  for (const auto& x : c.inputs) {
    st = lif_step(c.cfg, c.params, st, x);
    again.push_back(st);
  }
  for (size_t t = 0; t < again.size(); ++t) {
    CHECK(again[t].current == c.trace[t].current);
    CHECK(again[t].voltage == c.trace[t].voltage);
    CHECK(again[t].spikes == c.trace[t].spikes);
  }
}

TEST_CASE("property: current decays under zero drive") {
  LIFConfig cfg = default_cfg();
  std::mt19937_64 rng(11);
  LayerParams p;
  p.weights = MatrixXd::Zero(3, 2);
  p.biases = VectorXd::Zero(3);
  LayerState st = LayerState::zero(3);
  st.current = VectorXd::NullaryExpr(3, [&]() { return uniform_sample(rng, -2.0, 2.0); });
  VectorXd x = VectorXd::Zero(2);
  for (int t = 0; t < 5; ++t) {
    LayerState next = lif_step(cfg, p, st, x);
    for (Index i = 0; i < 3; ++i)
      CHECK(std::abs(next.current(i)) <= cfg.current_decay * std::abs(st.current(i)));
    st = next;
  }
}

TEST_CASE("property: per-timestep gradient contributions sum to the total") {
  std::mt19937_64 rng(21);
  for (int it = 0; it < 20; ++it) {
    auto c = make_random_case(rng, 3, 3, 4);
    auto full = lif_backward(c.cfg, c.params, c.trace, c.input_history, c.g_spikes);

    MatrixXd sum_w = MatrixXd::Zero(3, 3);
    VectorXd sum_b = VectorXd::Zero(3);
    const Index T = static_cast<Index>(c.trace.size());
    for (Index t = 0; t < T; ++t) {
      MatrixXd masked = MatrixXd::Zero(T, 3);
      masked.row(t) = c.g_spikes.row(t);
      auto part = lif_backward(c.cfg, c.params, c.trace, c.input_history, masked);
      sum_w += part.grads.grad_weights;
      sum_b += part.grads.grad_biases;
    }
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 3; ++j)
        CHECK(ref::close_rel(full.grads.grad_weights(i, j), sum_w(i, j), 1e-12));
      CHECK(ref::close_rel(full.grads.grad_biases(i), sum_b(i), 1e-12));
    }
  }
}

TEST_CASE("grad_weights equals sum of per-timestep outer products") {
  std::mt19937_64 rng(31);
  auto c = make_random_case(rng, 4, 3, 4);
  auto res = lif_backward(c.cfg, c.params, c.trace, c.input_history, c.g_spikes);
  MatrixXd acc = MatrixXd::Zero(3, 4);
  for (Index t = 0; t < 4; ++t)
    acc += res.g_current_per_t.row(t).transpose() * c.input_history.row(t);
  CHECK((acc - res.grads.grad_weights).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("batched step and backward agree with single-sample ops") {
  std::mt19937_64 rng(55);
  auto c = make_random_case(rng, 3, 4, 3);

  LayerStateBatch bst = LayerStateBatch::zero(4, 2);
  LayerState s1 = LayerState::zero(4), s2 = LayerState::zero(4);
  std::vector<LayerStateBatch> btrace;
  std::vector<MatrixXd> bx, bg;
  std::vector<LayerState> t1, t2;
  MatrixXd xh2(3, 3);
  for (Index t = 0; t < 3; ++t) {
    MatrixXd x(3, 2);
    x.col(0) = c.inputs[static_cast<size_t>(t)];
    x.col(1) = c.inputs[static_cast<size_t>((t + 1) % 3)];
    xh2.row(t) = x.col(1).transpose();
    bst = lif_step_batch(c.cfg, c.params, bst, x);
    btrace.push_back(bst);
    bx.push_back(x);
    MatrixXd g(4, 2);
    g.col(0) = c.g_spikes.row(t).transpose();
    g.col(1) = 2.0 * c.g_spikes.row(t).transpose();
    bg.push_back(g);

    s1 = lif_step(c.cfg, c.params, s1, x.col(0));
    s2 = lif_step(c.cfg, c.params, s2, x.col(1));
    t1.push_back(s1);
    t2.push_back(s2);
  }

  for (Index t = 0; t < 3; ++t) {
    CHECK((btrace[static_cast<size_t>(t)].voltage.col(0) - t1[static_cast<size_t>(t)].voltage).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(btrace[static_cast<size_t>(t)].spikes.col(1) == t2[static_cast<size_t>(t)].spikes);
  }

  auto rb = lif_backward_batch(c.cfg, c.params, btrace, bx, bg);
  auto r1 = lif_backward(c.cfg, c.params, t1, c.input_history, c.g_spikes);
  auto r2 = lif_backward(c.cfg, c.params, t2, xh2, (2.0 * c.g_spikes.array()).matrix());
  CHECK((rb.grad_weights - r1.grads.grad_weights - r2.grads.grad_weights).cwiseAbs().maxCoeff() <=
        1e-11);
  CHECK((rb.grad_biases - r1.grads.grad_biases - r2.grads.grad_biases).cwiseAbs().maxCoeff() <=
        1e-11);
}

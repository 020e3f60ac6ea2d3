// Test-only scalar reverse-mode tape. Builds the unrolled computation graph
// of a spiking network explicitly and differentiates it node by node, with
// the spike threshold treated as a primitive whose derivative is the
// rectangular surrogate and encoder spikes treated as straight-through.
// Independent of the library's analytic backward passes by construction.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace ref {

class Tape {
 public:
  struct Node {
    double val = 0.0;
    double grad = 0.0;
    int a = -1, b = -1;   // parent indices
    double da = 0.0, db = 0.0;  // local partials wrt parents
  };

  int leaf(double v) { return push(v, -1, -1, 0.0, 0.0); }

  int add(int x, int y) { return push(val(x) + val(y), x, y, 1.0, 1.0); }
  int sub(int x, int y) { return push(val(x) - val(y), x, y, 1.0, -1.0); }
  int mul(int x, int y) { return push(val(x) * val(y), x, y, val(y), val(x)); }
  int div(int x, int y) {
    const double vy = val(y);
    return push(val(x) / vy, x, y, 1.0 / vy, -val(x) / (vy * vy));
  }
  int neg(int x) { return push(-val(x), x, -1, -1.0, 0.0); }
  int scale(int x, double k) { return push(k * val(x), x, -1, k, 0.0); }
  int shift(int x, double k) { return push(val(x) + k, x, -1, 1.0, 0.0); }
  int exp_(int x) { return push(std::exp(val(x)), x, -1, std::exp(val(x)), 0.0); }
  int relu(int x) { return push(val(x) > 0.0 ? val(x) : 0.0, x, -1, val(x) > 0.0 ? 1.0 : 0.0, 0.0); }
  int tanh_(int x) {
    const double t = std::tanh(val(x));
    return push(t, x, -1, 1.0 - t * t, 0.0);
  }

  // Spike threshold primitive: value is the hard decision, local derivative
  // is the rectangular surrogate z(v).
  int threshold(int v, double v_th, double width) {
    const double x = val(v);
    const double z = std::abs(x - v_th) <= width / 2.0 ? 1.0 / width : 0.0;
    return push(x >= v_th ? 1.0 : 0.0, v, -1, z, 0.0);
  }

  // Straight-through primitive: forward value is the externally computed
  // spike, backward passes the gradient unchanged to `a`.
  int straight_through(int a, double spike_val) { return push(spike_val, a, -1, 1.0, 0.0); }

  int sum(const std::vector<int>& xs) {
    int acc = leaf(0.0);
    for (int x : xs) acc = add(acc, x);
    return acc;
  }

  double val(int i) const { return nodes_[static_cast<size_t>(i)].val; }
  double grad(int i) const { return nodes_[static_cast<size_t>(i)].grad; }

  // Nodes are created in topological order, so one reverse sweep suffices.
  void backward(int out) {
    for (auto& n : nodes_) n.grad = 0.0;
    nodes_[static_cast<size_t>(out)].grad = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
      const Node& n = nodes_[i];
      if (n.a >= 0) nodes_[static_cast<size_t>(n.a)].grad += n.grad * n.da;
      if (n.b >= 0) nodes_[static_cast<size_t>(n.b)].grad += n.grad * n.db;
    }
  }

 private:
  int push(double v, int a, int b, double da, double db) {
    Node n;
    n.val = v;
    n.a = a;
    n.b = b;
    n.da = da;
    n.db = db;
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace ref

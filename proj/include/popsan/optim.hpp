#pragma once

#include "popsan/common.hpp"

#include <vector>

namespace popsan {

using FlatView = Eigen::Map<Eigen::ArrayXd>;
using ConstFlatView = Eigen::Map<const Eigen::ArrayXd>;

inline FlatView flat(MatrixXd& m) { return FlatView(m.data(), m.size()); }
inline FlatView flat(VectorXd& v) { return FlatView(v.data(), v.size()); }
inline ConstFlatView cflat(const MatrixXd& m) { return ConstFlatView(m.data(), m.size()); }
inline ConstFlatView cflat(const VectorXd& v) { return ConstFlatView(v.data(), v.size()); }

/// Adaptive moment estimation over an ordered list of parameter tensors.
/// Moment buffers are lazily created on the first step.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long steps = 0;
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;

  void step(std::vector<FlatView> params, const std::vector<ConstFlatView>& grads, double lr);
};

}  // namespace popsan

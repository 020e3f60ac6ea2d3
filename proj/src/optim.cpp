#include "popsan/optim.hpp"

#include <cmath>

namespace popsan {

void Adam::step(std::vector<FlatView> params, const std::vector<ConstFlatView>& grads,
                double lr) {
  check_arg(params.size() == grads.size(), "Adam: parameter/gradient count mismatch");
  if (m.empty()) {
    for (const auto& p : params) {
      m.emplace_back(Eigen::ArrayXd::Zero(p.size()));
      v.emplace_back(Eigen::ArrayXd::Zero(p.size()));
    }
  }
  check_arg(m.size() == params.size(), "Adam: state does not match parameter count");

  ++steps;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (size_t i = 0; i < params.size(); ++i) {
    check_arg(params[i].size() == grads[i].size() && params[i].size() == m[i].size(),
              "Adam: tensor size mismatch");
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].square();
    params[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + epsilon);
  }
}

}  // namespace popsan

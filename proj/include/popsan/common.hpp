#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace popsan {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Contract checks stay on in release builds; violations are caller bugs.
inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_runtime(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

inline bool is_binary(const MatrixXd& m) {
  return ((m.array() == 0.0) || (m.array() == 1.0)).all();
}

}  // namespace popsan

#pragma once

#include "popsan/checkpoint.hpp"
#include "popsan/common.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace popsan {

struct Transition {
  VectorXd obs;
  VectorXd action;
  double reward = 0.0;
  VectorXd next_obs;
  bool done = false;
};

/// Ring buffer over flat transition storage with a seeded uniform sampler.
class ReplayBuffer {
 public:
  ReplayBuffer(Index capacity, Index obs_dim, Index act_dim, std::uint64_t seed);

  void add(const Transition& t);
  Index size() const { return fill_; }
  Index capacity() const { return capacity_; }

  /// Uniform indices over the filled region.
  std::vector<Index> sample_indices(Index batch);

  struct Batch {
    MatrixXd obs;       // [obs_dim x B]
    MatrixXd actions;   // [act_dim x B]
    VectorXd rewards;   // [B]
    MatrixXd next_obs;  // [obs_dim x B]
    VectorXd done;      // [B], 0 or 1
  };
  Batch gather(const std::vector<Index>& indices) const;
  Batch sample(Index batch);

  void save_tensors(ckpt::TensorMap& map, const std::string& prefix) const;
  void load_tensors(const ckpt::TensorMap& map, const std::string& prefix);

 private:
  Index capacity_;
  Index cursor_ = 0;
  Index fill_ = 0;
  MatrixXd obs_, actions_, next_obs_;
  VectorXd rewards_, done_;
  std::mt19937_64 rng_;
};

}  // namespace popsan

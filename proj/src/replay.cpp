#include "popsan/replay.hpp"

#include "popsan/rng.hpp"

namespace popsan {

ReplayBuffer::ReplayBuffer(Index capacity, Index obs_dim, Index act_dim, std::uint64_t seed)
    : capacity_(capacity),
      obs_(obs_dim, capacity),
      actions_(act_dim, capacity),
      next_obs_(obs_dim, capacity),
      rewards_(capacity),
      done_(capacity),
      rng_(seed) {
  check_arg(capacity >= 1, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::add(const Transition& t) {
  check_arg(t.obs.size() == obs_.rows() && t.next_obs.size() == obs_.rows() &&
                t.action.size() == actions_.rows(),
            "ReplayBuffer: transition dimension mismatch");
  obs_.col(cursor_) = t.obs;
  actions_.col(cursor_) = t.action;
  next_obs_.col(cursor_) = t.next_obs;
  rewards_(cursor_) = t.reward;
  done_(cursor_) = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (fill_ < capacity_) ++fill_;
}

std::vector<Index> ReplayBuffer::sample_indices(Index batch) {
  check_arg(fill_ >= 1, "ReplayBuffer: cannot sample from an empty buffer");
  check_arg(batch >= 1 && batch < capacity_, "ReplayBuffer: capacity must exceed batch size");
  std::vector<Index> idx(static_cast<size_t>(batch));
  for (auto& i : idx) {
    std::uniform_int_distribution<Index> d(0, fill_ - 1);
    i = d(rng_);
  }
  return idx;
}

ReplayBuffer::Batch ReplayBuffer::gather(const std::vector<Index>& indices) const {
  Batch b;
  const Index B = static_cast<Index>(indices.size());
  b.obs.resize(obs_.rows(), B);
  b.actions.resize(actions_.rows(), B);
  b.next_obs.resize(obs_.rows(), B);
  b.rewards.resize(B);
  b.done.resize(B);
  for (Index k = 0; k < B; ++k) {
    const Index i = indices[static_cast<size_t>(k)];
    check_arg(i >= 0 && i < fill_, "ReplayBuffer: index outside filled region");
    b.obs.col(k) = obs_.col(i);
    b.actions.col(k) = actions_.col(i);
    b.next_obs.col(k) = next_obs_.col(i);
    b.rewards(k) = rewards_(i);
    b.done(k) = done_(i);
  }
  return b;
}

ReplayBuffer::Batch ReplayBuffer::sample(Index batch) { return gather(sample_indices(batch)); }

void ReplayBuffer::save_tensors(ckpt::TensorMap& map, const std::string& prefix) const {
  map[prefix + "/capacity"] = ckpt::from_scalar(static_cast<double>(capacity_));
  map[prefix + "/cursor"] = ckpt::from_scalar(static_cast<double>(cursor_));
  map[prefix + "/fill"] = ckpt::from_scalar(static_cast<double>(fill_));
  map[prefix + "/obs"] = ckpt::from_matrix(obs_.leftCols(fill_));
  map[prefix + "/actions"] = ckpt::from_matrix(actions_.leftCols(fill_));
  map[prefix + "/next_obs"] = ckpt::from_matrix(next_obs_.leftCols(fill_));
  map[prefix + "/rewards"] = ckpt::from_vector(rewards_.head(fill_));
  map[prefix + "/done"] = ckpt::from_vector(done_.head(fill_));
  map[prefix + "/rng"] = ckpt::from_string(rng_to_string(rng_));
}

void ReplayBuffer::load_tensors(const ckpt::TensorMap& map, const std::string& prefix) {
  const Index capacity = static_cast<Index>(ckpt::to_scalar(ckpt::get(map, prefix + "/capacity")));
  check_runtime(capacity == capacity_, "ReplayBuffer: checkpoint capacity mismatch");
  cursor_ = static_cast<Index>(ckpt::to_scalar(ckpt::get(map, prefix + "/cursor")));
  fill_ = static_cast<Index>(ckpt::to_scalar(ckpt::get(map, prefix + "/fill")));
  obs_.leftCols(fill_) = ckpt::to_matrix(ckpt::get(map, prefix + "/obs"));
  actions_.leftCols(fill_) = ckpt::to_matrix(ckpt::get(map, prefix + "/actions"));
  next_obs_.leftCols(fill_) = ckpt::to_matrix(ckpt::get(map, prefix + "/next_obs"));
  rewards_.head(fill_) = ckpt::to_vector(ckpt::get(map, prefix + "/rewards"));
  done_.head(fill_) = ckpt::to_vector(ckpt::get(map, prefix + "/done"));
  rng_ = rng_from_string(ckpt::to_string(ckpt::get(map, prefix + "/rng")));
}

}  // namespace popsan

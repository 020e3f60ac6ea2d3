#pragma once

#include "popsan/common.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace popsan {

struct EnvSpec {
  Index obs_dim = 0;
  Index act_dim = 0;
  MatrixXd obs_ranges;     // [obs_dim x 2]
  MatrixXd action_ranges;  // [act_dim x 2]
  int horizon = 0;
  double dt = 0.0;
};

struct StepResult {
  VectorXd obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

/// Deterministic continuous-control environment. All randomness enters
/// through the reset seed, so (seed, action sequence) fixes the trajectory.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const VectorXd& action) = 0;

  // Full dynamic state as a flat vector, for exact training resume.
  virtual VectorXd state() const = 0;
  virtual void set_state(const VectorXd& s) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
};

/// 2-D double integrator: accelerate a point mass to a goal position.
/// Reward is negative distance with a +10 bonus on reaching the goal;
/// reaching it ends the episode.
class PointReachEnv : public Env {
 public:
  PointReachEnv();
  const EnvSpec& spec() const override { return spec_; }
  VectorXd reset(std::uint64_t seed) override;
  StepResult step(const VectorXd& action) override;
  VectorXd state() const override;
  void set_state(const VectorXd& s) override;
  std::unique_ptr<Env> clone() const override;

 private:
  VectorXd observe() const;

  EnvSpec spec_;
  Eigen::Vector2d pos_, vel_, goal_;
  int t_ = 0;
};

/// 2-link planar arm with a gripper, kinematic joint-velocity integration.
/// Stage 1 rewards closing the end-effector on the object, stage 2 (after a
/// grasp) rewards holding the object at the commanded height; holding it
/// within 0.02 for 10 consecutive steps is a success.
class PlanarPickEnv : public Env {
 public:
  PlanarPickEnv();
  const EnvSpec& spec() const override { return spec_; }
  VectorXd reset(std::uint64_t seed) override;
  StepResult step(const VectorXd& action) override;
  VectorXd state() const override;
  void set_state(const VectorXd& s) override;
  std::unique_ptr<Env> clone() const override;

  static Eigen::Vector2d fk(double q1, double q2);
  static constexpr double kLink1 = 0.5;
  static constexpr double kLink2 = 0.5;
  static constexpr double kJointSpeed = 2.0;  // rad/s at full command
  static constexpr double kGraspRadius = 0.05;
  static constexpr double kHoldTolerance = 0.02;
  static constexpr int kHoldSteps = 10;

 private:
  VectorXd observe() const;

  EnvSpec spec_;
  double q1_ = 0.0, q2_ = 0.0;
  Eigen::Vector2d object_;
  double target_height_ = 0.0;
  bool grasped_ = false;
  int hold_count_ = 0;
  int t_ = 0;
};

std::unique_ptr<Env> make_env(const std::string& name);

// Reference controllers used to certify that the tasks are solvable.
VectorXd scripted_point_reach_action(const VectorXd& obs);
VectorXd scripted_planar_pick_action(const VectorXd& obs);

}  // namespace popsan

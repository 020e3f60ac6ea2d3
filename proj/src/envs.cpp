#include "popsan/envs.hpp"

#include "popsan/rng.hpp"

#include <cmath>
#include <random>

namespace popsan {

namespace {

constexpr double kSuccessBonus = 10.0;

VectorXd clamp_action(const VectorXd& a, const MatrixXd& ranges) {
  check_arg(a.size() == ranges.rows(), "env: action dimension mismatch");
  check_arg(a.allFinite(), "env: action must be finite");
  VectorXd out(a.size());
  for (Index i = 0; i < a.size(); ++i)
    out(i) = std::min(std::max(a(i), ranges(i, 0)), ranges(i, 1));
  return out;
}

VectorXd clip_obs(const VectorXd& o, const MatrixXd& ranges) {
  VectorXd out(o.size());
  for (Index i = 0; i < o.size(); ++i)
    out(i) = std::min(std::max(o(i), ranges(i, 0)), ranges(i, 1));
  return out;
}

MatrixXd symmetric_ranges(Index n, double half) {
  MatrixXd r(n, 2);
  r.col(0).setConstant(-half);
  r.col(1).setConstant(half);
  return r;
}

}  // namespace

// ---------------- PointReach ----------------

PointReachEnv::PointReachEnv() {
  spec_.obs_dim = 4;  // goal - pos (2), velocity (2)
  spec_.act_dim = 2;
  spec_.obs_ranges = MatrixXd(4, 2);
  spec_.obs_ranges << -2.0, 2.0, -2.0, 2.0, -1.0, 1.0, -1.0, 1.0;
  spec_.action_ranges = symmetric_ranges(2, 1.0);
  spec_.horizon = 100;
  spec_.dt = 0.05;
  pos_.setZero();
  vel_.setZero();
  goal_.setZero();
}

VectorXd PointReachEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  pos_ << uniform_sample(rng, -0.8, 0.8), uniform_sample(rng, -0.8, 0.8);
  goal_ << uniform_sample(rng, -0.8, 0.8), uniform_sample(rng, -0.8, 0.8);
  vel_.setZero();
  t_ = 0;
  return observe();
}

StepResult PointReachEnv::step(const VectorXd& action) {
  VectorXd a = clamp_action(action, spec_.action_ranges);
  vel_ += a * spec_.dt;
  const double speed = vel_.norm();
  if (speed > 1.0) vel_ *= 1.0 / speed;
  pos_ += vel_ * spec_.dt;
  // workspace box
  pos_ = pos_.cwiseMax(-1.0).cwiseMin(1.0);
  ++t_;

  const double dist = (pos_ - goal_).norm();
  StepResult r;
  r.success = dist < 0.05;
  r.reward = -dist + (r.success ? kSuccessBonus : 0.0);
  r.done = r.success || t_ >= spec_.horizon;
  r.obs = observe();
  return r;
}

VectorXd PointReachEnv::observe() const {
  VectorXd o(4);
  o << goal_(0) - pos_(0), goal_(1) - pos_(1), vel_(0), vel_(1);
  return clip_obs(o, spec_.obs_ranges);
}

VectorXd PointReachEnv::state() const {
  VectorXd s(7);
  s << pos_(0), pos_(1), vel_(0), vel_(1), goal_(0), goal_(1), static_cast<double>(t_);
  return s;
}

void PointReachEnv::set_state(const VectorXd& s) {
  check_arg(s.size() == 7, "PointReachEnv: bad state vector");
  pos_ << s(0), s(1);
  vel_ << s(2), s(3);
  goal_ << s(4), s(5);
  t_ = static_cast<int>(s(6));
}

std::unique_ptr<Env> PointReachEnv::clone() const { return std::make_unique<PointReachEnv>(*this); }

// ---------------- PlanarPick ----------------

Eigen::Vector2d PlanarPickEnv::fk(double q1, double q2) {
  return {kLink1 * std::cos(q1) + kLink2 * std::cos(q1 + q2),
          kLink1 * std::sin(q1) + kLink2 * std::sin(q1 + q2)};
}

PlanarPickEnv::PlanarPickEnv() {
  spec_.obs_dim = 6;  // q1, q2, object - ee (2), target_height - object_y, grasped
  spec_.act_dim = 3;  // two joint commands + gripper
  spec_.obs_ranges = MatrixXd(6, 2);
  spec_.obs_ranges << -M_PI, M_PI, -M_PI, M_PI, -2.0, 2.0, -2.0, 2.0, -2.0, 2.0, 0.0, 1.0;
  spec_.action_ranges = symmetric_ranges(3, 1.0);
  spec_.horizon = 200;
  spec_.dt = 0.05;
  object_.setZero();
}

VectorXd PlanarPickEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  q1_ = uniform_sample(rng, 0.6, 1.4);
  q2_ = uniform_sample(rng, -1.6, -0.8);
  object_ << uniform_sample(rng, 0.4, 0.7), uniform_sample(rng, 0.05, 0.25);
  target_height_ = object_(1) + 0.3;
  grasped_ = false;
  hold_count_ = 0;
  t_ = 0;
  return observe();
}

StepResult PlanarPickEnv::step(const VectorXd& action) {
  VectorXd a = clamp_action(action, spec_.action_ranges);
  q1_ += a(0) * kJointSpeed * spec_.dt;
  q2_ += a(1) * kJointSpeed * spec_.dt;
  q1_ = std::min(std::max(q1_, -M_PI), M_PI);
  q2_ = std::min(std::max(q2_, -M_PI), M_PI);
  const bool gripper_closed = a(2) > 0.5;

  Eigen::Vector2d ee = fk(q1_, q2_);
  if (!grasped_) {
    if (gripper_closed && (ee - object_).norm() <= kGraspRadius) grasped_ = true;
  } else if (!gripper_closed) {
    grasped_ = false;  // release; object stays where it is
  }
  if (grasped_) object_ = ee;

  ++t_;
  StepResult r;
  if (!grasped_) {
    r.reward = -(ee - object_).norm();
    hold_count_ = 0;
  } else {
    const double height_err = std::abs(object_(1) - target_height_);
    r.reward = -height_err;
    hold_count_ = height_err <= kHoldTolerance ? hold_count_ + 1 : 0;
  }
  r.success = hold_count_ >= kHoldSteps;
  if (r.success) r.reward += kSuccessBonus;
  r.done = r.success || t_ >= spec_.horizon;
  r.obs = observe();
  return r;
}

VectorXd PlanarPickEnv::observe() const {
  Eigen::Vector2d ee = fk(q1_, q2_);
  VectorXd o(6);
  o << q1_, q2_, object_(0) - ee(0), object_(1) - ee(1), target_height_ - object_(1),
      grasped_ ? 1.0 : 0.0;
  return clip_obs(o, spec_.obs_ranges);
}

VectorXd PlanarPickEnv::state() const {
  VectorXd s(8);
  s << q1_, q2_, object_(0), object_(1), target_height_, grasped_ ? 1.0 : 0.0,
      static_cast<double>(hold_count_), static_cast<double>(t_);
  return s;
}

void PlanarPickEnv::set_state(const VectorXd& s) {
  check_arg(s.size() == 8, "PlanarPickEnv: bad state vector");
  q1_ = s(0);
  q2_ = s(1);
  object_ << s(2), s(3);
  target_height_ = s(4);
  grasped_ = s(5) != 0.0;
  hold_count_ = static_cast<int>(s(6));
  t_ = static_cast<int>(s(7));
}

std::unique_ptr<Env> PlanarPickEnv::clone() const { return std::make_unique<PlanarPickEnv>(*this); }

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "point_reach") return std::make_unique<PointReachEnv>();
  if (name == "planar_pick") return std::make_unique<PlanarPickEnv>();
  throw std::invalid_argument("unknown environment '" + name + "'");
}

// ---------------- scripted reference policies ----------------

VectorXd scripted_point_reach_action(const VectorXd& obs) {
  check_arg(obs.size() == 4, "scripted_point_reach_action: bad observation");
  Eigen::Vector2d delta = obs.head<2>();
  Eigen::Vector2d vel = obs.segment<2>(2);
  Eigen::Vector2d a = 6.0 * delta - 4.0 * vel;
  VectorXd out(2);
  out << std::min(std::max(a(0), -1.0), 1.0), std::min(std::max(a(1), -1.0), 1.0);
  return out;
}

VectorXd scripted_planar_pick_action(const VectorXd& obs) {
  check_arg(obs.size() == 6, "scripted_planar_pick_action: bad observation");
  const double q1 = obs(0), q2 = obs(1);
  Eigen::Vector2d to_object = obs.segment<2>(2);
  const double height_gap = obs(4);
  const bool grasped = obs(5) > 0.5;

  Eigen::Vector2d v_des;
  double grip;
  if (!grasped) {
    v_des = 2.0 * to_object;
    grip = to_object.norm() <= 0.035 ? 1.0 : -1.0;
  } else {
    v_des = Eigen::Vector2d(0.0, 2.0 * height_gap);
    grip = 1.0;
  }
  const double vmax = 0.35;
  if (v_des.norm() > vmax) v_des *= vmax / v_des.norm();

  // damped least squares on the 2-link Jacobian
  const double s1 = std::sin(q1), c1 = std::cos(q1);
  const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
  Eigen::Matrix2d J;
  J << -PlanarPickEnv::kLink1 * s1 - PlanarPickEnv::kLink2 * s12, -PlanarPickEnv::kLink2 * s12,
      PlanarPickEnv::kLink1 * c1 + PlanarPickEnv::kLink2 * c12, PlanarPickEnv::kLink2 * c12;
  const double lambda = 0.05;
  Eigen::Matrix2d JJt = J * J.transpose() + lambda * lambda * Eigen::Matrix2d::Identity();
  Eigen::Vector2d qdot = J.transpose() * JJt.ldlt().solve(v_des);

  VectorXd out(3);
  out(0) = std::min(std::max(qdot(0) / PlanarPickEnv::kJointSpeed, -1.0), 1.0);
  out(1) = std::min(std::max(qdot(1) / PlanarPickEnv::kJointSpeed, -1.0), 1.0);
  out(2) = grip;
  return out;
}

}  // namespace popsan

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "artic/errors.hpp"
#include "artic/joint.hpp"
#include "artic/lie.hpp"
#include "artic/observation.hpp"

namespace artic {

// --- Residuals ---------------------------------------------------------------

// r_exp = f_twist(q; nu, T_ab) (-) (x_a^-1 x_b).
inline Twist residual_exp(const Pose& x_a, const Pose& x_b, const Pose& t_ab,
                          const Twist& nu, double q) {
  return pose_error(f_twist(q, nu, t_ab), compose(inverse(x_a), x_b));
}

// r_pose = x (-) z.
inline Twist residual_obs_pose(const Pose& x, const Pose& z) { return pose_error(x, z); }

// r_center = translation(x) - c.
inline Vector3 residual_obs_center(const Pose& x, const Vector3& c) {
  return x.translation - c;
}

// r_delta = (Exp(delta) x^(t)) (-) x^(t+1), delta left-applied in the world frame.
inline Twist residual_obs_delta(const Pose& x_t, const Pose& x_t1, const Twist& delta) {
  return pose_error(compose(exp_map(delta), x_t), x_t1);
}

// Huber loss on a whitened residual norm d; L = d^2/2 inside the knee,
// delta*(|d| - delta/2) outside.
inline double huber(double d, double delta) {
  const double a = std::abs(d);
  return a <= delta ? 0.5 * d * d : delta * (a - 0.5 * delta);
}

// IRLS weight L'(d)/d for the Huber loss.
inline double huber_weight(double d, double delta) {
  const double a = std::abs(d);
  return a <= delta ? 1.0 : delta / a;
}

// --- Problem -----------------------------------------------------------------

enum class FactorKind {
  PoseObs = 0,
  CenterObs = 1,
  DeltaObs = 2,
  Exp = 3,
  OrientPrior = 4,  // weak orientation gauge pin for parts without pose observations
  NormPrior = 5,    // soft ||nu||^2 = 1 pin removing the (q, nu) scale gauge
};

struct Factor {
  FactorKind kind = FactorKind::Exp;
  int t = 0;     // timestep (Exp, obs factors); 0 for OrientPrior; horizon for NormPrior
  int part = 0;  // 0/1 for per-part factors; 2 for Exp/NormPrior (sorts after both parts)
  Pose z_pose;
  Vector3 z_center = Vector3::Zero();
  Twist z_delta;
  Eigen::VectorXd sigma;  // per-component whitening scales

  int dim() const { return static_cast<int>(sigma.size()); }
  bool is_prior() const {
    return kind == FactorKind::OrientPrior || kind == FactorKind::NormPrior;
  }
};

// Latent part poses x_k^(t) plus the joint variables. q_seq[0] is anchored to
// zero by hard substitution and never optimized.
struct VariableAssignment {
  std::array<std::vector<Pose>, 2> x;
  JointModel joint;
};

// Immutable estimation problem over two parts: factor list is materialized in
// a fixed canonical order (timestep, then part, then kind) so cost evaluation
// is bitwise deterministic.
struct Problem {
  int horizon = 0;
  std::array<int, 2> part_ids = {0, 1};  // external ids; index 0 is part a
  NoiseSpec noise;
  JointType joint_constraint = JointType::Unconstrained;
  double huber_delta = 0.01;
  std::vector<Factor> factors;
  std::vector<Observation> observations;  // canonical order, parts re-indexed to 0/1
  std::array<bool, 2> has_pose_obs = {false, false};

  static constexpr double kNormPriorSigma = 0.01;  // weight 1e2 on ||nu||^2 - 1
  static constexpr double kOrientPriorSigma = 10.0;
};

namespace detail {

inline int kind_rank(FactorKind k) { return static_cast<int>(k); }

inline bool factor_order(const Factor& a, const Factor& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.part != b.part) return a.part < b.part;
  return kind_rank(a.kind) < kind_rank(b.kind);
}

inline int obs_kind_rank(ObsKind k) { return static_cast<int>(k); }

inline bool observation_order(const Observation& a, const Observation& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.part != b.part) return a.part < b.part;
  return obs_kind_rank(a.kind) < obs_kind_rank(b.kind);
}

inline Eigen::VectorXd twist_sigma(const NoiseSpec& n) {
  Eigen::VectorXd s(6);
  s << n.sigma_pos, n.sigma_pos, n.sigma_pos, n.sigma_ori, n.sigma_ori, n.sigma_ori;
  return s;
}

}  // namespace detail

// Evaluate one factor's raw (unwhitened) residual.
inline Eigen::VectorXd factor_residual(const Factor& f, const VariableAssignment& v) {
  switch (f.kind) {
    case FactorKind::PoseObs:
      return residual_obs_pose(v.x[f.part][f.t], f.z_pose).to_vector();
    case FactorKind::CenterObs:
      return residual_obs_center(v.x[f.part][f.t], f.z_center);
    case FactorKind::DeltaObs:
      return residual_obs_delta(v.x[f.part][f.t], v.x[f.part][f.t + 1], f.z_delta).to_vector();
    case FactorKind::Exp:
      return residual_exp(v.x[0][f.t], v.x[1][f.t], v.joint.t_twist, v.joint.nu,
                          v.joint.q_seq[f.t]).to_vector();
    case FactorKind::OrientPrior: {
      // Rotation-only discrepancy from the identity target; pins one SO(3)
      // gauge direction per part chain in center/delta graphs.
      Pose rot_only(v.x[f.part][f.t].rotation, Vector3::Zero());
      return log_map(inverse(rot_only)).w;
    }
    case FactorKind::NormPrior: {
      Eigen::VectorXd r(1);
      const Vector6 nu = v.joint.nu.to_vector();
      r[0] = nu.squaredNorm() - 1.0;
      return r;
    }
  }
  return Eigen::VectorXd();
}

// Whitened Mahalanobis norm of one factor's residual.
inline double factor_distance(const Factor& f, const VariableAssignment& v) {
  const Eigen::VectorXd r = factor_residual(f, v);
  return (r.array() / f.sigma.array()).matrix().norm();
}

inline double factor_cost(const Problem& p, const Factor& f, const VariableAssignment& v) {
  return huber(factor_distance(f, v), p.huber_delta);
}

namespace detail {

inline double accumulate_cost(const Problem& p, const VariableAssignment& v,
                              bool include_priors) {
  double cost = 0.0;
  try {
    for (const Factor& f : p.factors) {
      if (!include_priors && f.is_prior()) continue;
      cost += factor_cost(p, f, v);
    }
  } catch (const BranchCutError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(cost)) return std::numeric_limits<double>::infinity();
  return cost;
}

}  // namespace detail

// Sum of Huber-robustified whitened factor costs; +inf when the assignment
// hits the Log branch cut (the restart is then discarded upstream).
inline double total_cost(const Problem& p, const VariableAssignment& v) {
  return detail::accumulate_cost(p, v, true);
}

// Data-factor subtotal (gauge priors excluded).
inline double data_cost(const Problem& p, const VariableAssignment& v) {
  return detail::accumulate_cost(p, v, false);
}

// Build a validated Problem from raw observations. Exactly two distinct part
// ids are required; they are re-indexed to {0, 1} in ascending order.
inline Problem build_problem(const std::vector<Observation>& obs, const NoiseSpec& noise,
                             JointType constraint, double huber_delta = 0.01) {
  if (!(noise.sigma_pos > 0.0) || !(noise.sigma_ori > 0.0)) {
    throw DataError("build_problem: noise sigmas must be strictly positive");
  }
  if (!(huber_delta > 0.0)) throw DataError("build_problem: huber_delta must be positive");
  if (obs.empty()) throw DataError("build_problem: no observations");

  std::set<int> ids;
  for (const auto& o : obs) ids.insert(o.part);
  if (ids.size() != 2) {
    throw DataError("build_problem: need observations of exactly 2 parts, got " +
                    std::to_string(ids.size()));
  }

  Problem p;
  p.part_ids = {*ids.begin(), *std::next(ids.begin())};
  p.noise = noise;
  p.joint_constraint = constraint;
  p.huber_delta = huber_delta;

  int horizon = 0;
  p.observations.reserve(obs.size());
  for (Observation o : obs) {
    o.part = (o.part == p.part_ids[0]) ? 0 : 1;
    horizon = std::max(horizon, o.t + (o.kind == ObsKind::Delta ? 2 : 1));
    p.observations.push_back(o);
  }
  if (horizon < 2) throw DataError("build_problem: horizon must span at least 2 timesteps");
  p.horizon = horizon;
  std::stable_sort(p.observations.begin(), p.observations.end(), detail::observation_order);

  for (const auto& o : p.observations) {
    if (o.kind == ObsKind::FullPose) p.has_pose_obs[o.part] = true;
  }

  const Eigen::VectorXd sig6 = detail::twist_sigma(noise);
  const Eigen::VectorXd sig3 = Eigen::VectorXd::Constant(3, noise.sigma_pos);

  for (const auto& o : p.observations) {
    Factor f;
    f.t = o.t;
    f.part = o.part;
    switch (o.kind) {
      case ObsKind::FullPose:
        f.kind = FactorKind::PoseObs;
        f.z_pose = o.pose;
        f.sigma = sig6;
        break;
      case ObsKind::Center:
        f.kind = FactorKind::CenterObs;
        f.z_center = o.center;
        f.sigma = sig3;
        break;
      case ObsKind::Delta:
        f.kind = FactorKind::DeltaObs;
        f.z_delta = o.delta;
        f.sigma = sig6;
        break;
    }
    p.factors.push_back(f);
  }

  // One exponential factor per timestep; covariance defaults to the
  // observation NoiseSpec.
  for (int t = 0; t < horizon; ++t) {
    Factor f;
    f.kind = FactorKind::Exp;
    f.t = t;
    f.part = 2;
    f.sigma = sig6;
    p.factors.push_back(f);
  }

  // Gauge pins: soft unit-norm prior on nu, plus a weak orientation prior on
  // the first pose of each part that has no full-pose observation.
  {
    Factor f;
    f.kind = FactorKind::NormPrior;
    f.t = horizon;
    f.part = 2;
    f.sigma = Eigen::VectorXd::Constant(1, Problem::kNormPriorSigma);
    p.factors.push_back(f);
  }
  for (int part = 0; part < 2; ++part) {
    if (p.has_pose_obs[part]) continue;
    Factor f;
    f.kind = FactorKind::OrientPrior;
    f.t = 0;
    f.part = part;
    f.sigma = Eigen::VectorXd::Constant(3, Problem::kOrientPriorSigma);
    p.factors.push_back(f);
  }

  std::stable_sort(p.factors.begin(), p.factors.end(), detail::factor_order);
  return p;
}

}  // namespace artic

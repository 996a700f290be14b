#pragma once

#include <string>
#include <vector>

#include "artic/errors.hpp"
#include "artic/lie.hpp"

namespace artic {

// Grasp-point path specification for the tangent similarity metric.
// x0 is the grasping point at q = 0.
struct GraspSpec {
  Vector3 x0 = Vector3::Zero();
  double q_min = 0.0;
  double q_max = 1.0;
  int n_samples = 100;
};

// Screw parameters (l, m, theta, d): Pluecker axis (direction l, moment
// m = p x l), rotation theta about and displacement d along the axis.
struct ScrewParams {
  Vector3 l = Vector3::UnitZ();
  Vector3 m = Vector3::Zero();
  double theta = 0.0;
  double d = 0.0;
};

// x(q) = Exp(q nu) x0.
inline Vector3 grasp_path(double q, const Twist& nu, const Vector3& x0) {
  return transform_point(exp_map(q * nu), x0);
}

// Linear velocity of the twist's field at a world point: v + w x point.
// (Linear component of Ad_{Exp(point)^-1}(nu) with Exp of a pure translation.)
inline Vector3 velocity_at_point(const Twist& nu, const Vector3& point) {
  return nu.v + nu.w.cross(point);
}

inline Vector3 linear_velocity(const Twist& nu, double q, const Vector3& x0) {
  return velocity_at_point(nu, grasp_path(q, nu, x0));
}

namespace detail {

constexpr double kDegenerateSpeed = 1e-12;

inline double cosine_or_throw(const Vector3& a, const Vector3& b, double q) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kDegenerateSpeed || nb < kDegenerateSpeed) {
    throw DegeneracyError("tangent similarity: zero linear velocity at q = " +
                          std::to_string(q));
  }
  return a.dot(b) / (na * nb);
}

}  // namespace detail

// Mean cosine similarity between the true and predicted linear velocities at
// the grasp point along the TRUE path x(q) = Exp(q nu_true) x0. Samples are
// n equally spaced q values placed at cell midpoints of [q_min, q_max] (the
// uniform mean then approximates the path integral to O(1/n^2)).
// A perfect prediction yields 1; an orthogonal one yields 0.
inline double tangent_similarity(const Twist& nu_true, const Twist& nu_pred,
                                 const GraspSpec& g) {
  if (!(g.q_max > g.q_min)) throw std::invalid_argument("GraspSpec: q_max must exceed q_min");
  if (g.n_samples < 2) throw std::invalid_argument("GraspSpec: n_samples must be >= 2");
  const double step = (g.q_max - g.q_min) / g.n_samples;
  double sum = 0.0;
  for (int i = 0; i < g.n_samples; ++i) {
    const double q = g.q_min + (i + 0.5) * step;
    const Vector3 x = grasp_path(q, nu_true, g.x0);
    sum += detail::cosine_or_throw(velocity_at_point(nu_true, x),
                                   velocity_at_point(nu_pred, x), q);
  }
  return sum / g.n_samples;
}

// Positive rescaling of the prediction leaves the metric unchanged (the
// velocities are normalized); exposed so the invariance is testable directly.
inline double tangent_similarity_scaled(const Twist& nu_true, const Twist& nu_pred,
                                        const GraspSpec& g, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("tangent_similarity_scaled: c must be > 0");
  return tangent_similarity(nu_true, c * nu_pred, g);
}

// nu = [-theta m + d l; theta l].
inline Twist screw_to_twist(const ScrewParams& s) {
  if (std::abs(s.l.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("screw_to_twist: ||l|| must be 1");
  }
  if (std::abs(s.l.dot(s.m)) > 1e-9) {
    throw std::invalid_argument("screw_to_twist: Pluecker constraint l . m = 0 violated");
  }
  return Twist(-s.theta * s.m + s.d * s.l, s.theta * s.l);
}

// Time-indexed variant for per-timestep twist predictions: mean cosine of the
// two velocity fields at the given grasp points.
inline double time_indexed_similarity(const std::vector<Twist>& true_twists,
                                      const std::vector<Twist>& pred_twists,
                                      const std::vector<Vector3>& grasp_points) {
  const std::size_t n = true_twists.size();
  if (n == 0 || pred_twists.size() != n || grasp_points.size() != n) {
    throw std::invalid_argument("time_indexed_similarity: sequences must share a length >= 1");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sum += detail::cosine_or_throw(velocity_at_point(true_twists[t], grasp_points[t]),
                                   velocity_at_point(pred_twists[t], grasp_points[t]),
                                   static_cast<double>(t));
  }
  return sum / static_cast<double>(n);
}

}  // namespace artic

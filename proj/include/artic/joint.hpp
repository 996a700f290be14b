#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "artic/errors.hpp"
#include "artic/lie.hpp"

namespace artic {

// 1-DoF joint kinds. Prismatic: w = 0. Revolute: zero pitch (v . w = 0), with
// the axis offset carried by the twist-frame transform. Unconstrained is the
// general helical screw.
enum class JointType { Prismatic, Revolute, Unconstrained };

inline std::string to_string(JointType t) {
  switch (t) {
    case JointType::Prismatic: return "prismatic";
    case JointType::Revolute: return "revolute";
    default: return "unconstrained";
  }
}

inline JointType joint_type_from_string(const std::string& s) {
  if (s == "prismatic") return JointType::Prismatic;
  if (s == "revolute") return JointType::Revolute;
  if (s == "unconstrained" || s == "helical") return JointType::Unconstrained;
  throw ConfigError("unknown joint type '" + s + "'");
}

// Time-invariant joint parameters (nu, T_twist) plus the per-timestep
// configuration sequence. The relative pose of part b in part a's frame is
// f_twist(q_seq[t]; nu, t_twist).
struct JointModel {
  Twist nu;
  Pose t_twist;
  std::vector<double> q_seq;
};

inline Pose f_twist(double q, const Twist& nu, const Pose& t_twist) {
  return compose(t_twist, exp_map(q * nu));
}

inline Twist canonical_prismatic(const Vector3& direction) {
  if (std::abs(direction.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("canonical_prismatic: direction must be unit length");
  }
  return Twist(direction, Vector3::Zero());
}

// Twist of a revolute joint about `axis` through `point_on_axis`; points on
// the axis have zero velocity: v = -axis x point.
inline Twist canonical_revolute(const Vector3& axis, const Vector3& point_on_axis) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("canonical_revolute: axis must be unit length");
  }
  return Twist(-axis.cross(point_on_axis), axis);
}

// Nearest twist (Euclidean) satisfying the joint-type constraint.
inline Twist project_joint_type(const Twist& nu, JointType tag) {
  switch (tag) {
    case JointType::Prismatic:
      return Twist(nu.v, Vector3::Zero());
    case JointType::Revolute: {
      const double w2 = nu.w.squaredNorm();
      if (w2 < 1e-18) {
        throw DegeneracyError("project_joint_type: revolute projection with ||w|| < 1e-9");
      }
      return Twist(nu.v - (nu.v.dot(nu.w) / w2) * nu.w, nu.w);
    }
    default:
      return nu;
  }
}

// Removes the (q, nu) scale gauge for reporting: ||nu|| = 1 with the sign of
// the largest-magnitude component of w (or of v when w = 0) positive; q_seq
// rescaled to compensate.
inline JointModel normalize_joint_model(const JointModel& m) {
  JointModel out = m;
  const double scale = m.nu.norm();
  if (scale < 1e-12) return out;
  out.nu = m.nu * (1.0 / scale);

  const Vector3& pick = (out.nu.w.norm() > 1e-12) ? out.nu.w : out.nu.v;
  int imax = 0;
  pick.cwiseAbs().maxCoeff(&imax);
  const double sign = pick[imax] < 0.0 ? -1.0 : 1.0;
  out.nu = out.nu * sign;

  for (double& q : out.q_seq) q *= scale * sign;
  return out;
}

// The joint twist expressed in the camera/world frame, given the base part's
// latent pose at the reference timestep: the mover's motion satisfies
// x_b^(t) (x_b^(0))^-1 = Exp((q_t - q_0) Ad_{x_a T_twist}(nu)) for a static base.
inline Twist twist_in_camera_frame(const JointModel& m, const Pose& x_a) {
  return adjoint(compose(x_a, m.t_twist), m.nu);
}

// --- JSON serialization -----------------------------------------------------
// {"nu": [v1,v2,v3,w1,w2,w3],
//  "t_twist": {"rotation": [9 row-major], "translation": [3]},
//  "q": [...]}

inline nlohmann::json pose_to_json(const Pose& p) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[3 * r + c] = p.rotation(r, c);
  return nlohmann::json{{"rotation", rot},
                        {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
  const auto rot = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (rot.size() != 9 || tr.size() != 3) throw DataError("pose: expected 9+3 floats");
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[3 * r + c];
  p.translation = Vector3(tr[0], tr[1], tr[2]);
  return p;
}

inline nlohmann::json twist_to_json(const Twist& t) {
  return nlohmann::json{t.v.x(), t.v.y(), t.v.z(), t.w.x(), t.w.y(), t.w.z()};
}

inline Twist twist_from_json(const nlohmann::json& j) {
  const auto x = j.get<std::vector<double>>();
  if (x.size() != 6) throw DataError("twist: expected 6 floats");
  return Twist(x[0], x[1], x[2], x[3], x[4], x[5]);
}

inline nlohmann::json joint_model_to_json(const JointModel& m) {
  return nlohmann::json{{"nu", twist_to_json(m.nu)},
                        {"t_twist", pose_to_json(m.t_twist)},
                        {"q", m.q_seq}};
}

inline JointModel joint_model_from_json(const nlohmann::json& j) {
  JointModel m;
  m.nu = twist_from_json(j.at("nu"));
  m.t_twist = pose_from_json(j.at("t_twist"));
  m.q_seq = j.at("q").get<std::vector<double>>();
  return m;
}

}  // namespace artic

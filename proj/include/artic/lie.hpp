#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

// Minimal SE(3)/se(3) toolkit. Twist layout is (v, w) -- linear first --
// everywhere in this library.

namespace artic {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;

// Log evaluated at or beyond the principal branch (rotation angle >= pi - 1e-6).
struct BranchCutError : std::domain_error {
  explicit BranchCutError(const std::string& what) : std::domain_error(what) {}
};

struct Twist {
  Vector3 v = Vector3::Zero();
  Vector3 w = Vector3::Zero();

  Twist() = default;
  Twist(const Vector3& v_, const Vector3& w_) : v(v_), w(w_) {}
  Twist(double v0, double v1, double v2, double w0, double w1, double w2)
      : v(v0, v1, v2), w(w0, w1, w2) {}

  static Twist Zero() { return Twist(); }
  static Twist from_vector(const Vector6& x) { return Twist(x.head<3>(), x.tail<3>()); }

  Vector6 to_vector() const {
    Vector6 x;
    x << v, w;
    return x;
  }

  double norm() const { return std::sqrt(v.squaredNorm() + w.squaredNorm()); }
  bool all_finite() const { return v.allFinite() && w.allFinite(); }

  Twist operator+(const Twist& o) const { return Twist(v + o.v, w + o.w); }
  Twist operator-(const Twist& o) const { return Twist(v - o.v, w - o.w); }
  Twist operator-() const { return Twist(-v, -w); }
  Twist operator*(double s) const { return Twist(s * v, s * w); }
};

inline Twist operator*(double s, const Twist& t) { return t * s; }

struct Pose {
  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  Pose() = default;
  Pose(const Matrix3& r, const Vector3& t) : rotation(r), translation(t) {}

  static Pose Identity() { return Pose(); }
  static Pose from_translation(const Vector3& t) { return Pose(Matrix3::Identity(), t); }
};

inline Matrix3 skew(const Vector3& a) {
  Matrix3 m;
  m << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return m;
}

// Nearest rotation in Frobenius norm (polar factor via SVD).
inline Matrix3 project_to_rotation(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Matrix3 flip = Matrix3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

namespace detail {

constexpr double kSmallAngle = 1e-8;        // Taylor branch threshold on |w|
constexpr double kBranchCutEps = 1e-6;      // Log domain ends at pi - this
constexpr double kOrthoDriftTol = 1e-7;     // ||R^T R - I||_F re-orthonormalization trigger

inline void reorthonormalize_if_drifted(Matrix3& r) {
  const Matrix3 gram = r.transpose() * r;
  if ((gram - Matrix3::Identity()).norm() > kOrthoDriftTol) {
    r = project_to_rotation(r);
  }
}

}  // namespace detail

// Closed-form SE(3) exponential (Rodrigues + V matrix).
inline Pose exp_map(const Twist& xi) {
  const double theta2 = xi.w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Matrix3 wx = skew(xi.w);
  const Matrix3 wx2 = wx * wx;

  double a, b, c;  // R = I + a*wx + b*wx2,  V = I + b*wx + c*wx2
  if (theta < detail::kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    const double half = 0.5 * theta;
    const double sh = std::sin(half) / half;
    b = 0.5 * sh * sh;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }

  Pose p;
  p.rotation = Matrix3::Identity() + a * wx + b * wx2;
  p.translation = (Matrix3::Identity() + b * wx + c * wx2) * xi.v;
  return p;
}

// Principal-branch SE(3) logarithm; inverse of exp_map for angles < pi - 1e-6.
inline Twist log_map(const Pose& p) {
  const Matrix3& r = p.rotation;
  const Vector3 axis_sin(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                         0.5 * (r(1, 0) - r(0, 1)));
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double sin_theta = axis_sin.norm();
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta >= M_PI - detail::kBranchCutEps) {
    throw BranchCutError("log_map: rotation angle " + std::to_string(theta) +
                         " within 1e-6 of pi (principal branch)");
  }

  Twist xi;
  double gamma;  // V^{-1} = I - wx/2 + gamma*wx^2
  if (theta < detail::kSmallAngle) {
    xi.w = axis_sin * (1.0 + theta * theta / 6.0);
    gamma = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    xi.w = axis_sin * (theta / sin_theta);
    const double half = 0.5 * theta;
    gamma = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  const Matrix3 wx = skew(xi.w);
  xi.v = (Matrix3::Identity() - 0.5 * wx + gamma * (wx * wx)) * p.translation;
  return xi;
}

inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  detail::reorthonormalize_if_drifted(out.rotation);
  return out;
}

inline Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

// Ad_p(xi) = (R v + t x (R w), R w), so exp(Ad_p xi) = p exp(xi) p^{-1}.
inline Twist adjoint(const Pose& p, const Twist& xi) {
  const Vector3 rw = p.rotation * xi.w;
  return Twist(p.rotation * xi.v + p.translation.cross(rw), rw);
}

// Twist error x (-) y = Log(x^{-1} y); zero iff x == y.
inline Twist pose_error(const Pose& x, const Pose& y) {
  return log_map(compose(inverse(x), y));
}

inline Vector3 transform_point(const Pose& p, const Vector3& pt) {
  return p.rotation * pt + p.translation;
}

}  // namespace artic

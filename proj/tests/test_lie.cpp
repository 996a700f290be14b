#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artic/lie.hpp"
#include "artic/rng.hpp"

using namespace artic;

namespace {

double pose_diff(const Pose& a, const Pose& b) {
  return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

Pose random_pose(Rng& rng, double angle_cap = 2.5) {
  Twist xi(rng.normal3() * 0.7, rng.unit_vector3() * rng.uniform(0.0, angle_cap));
  return exp_map(xi);
}

}  // namespace

TEST_CASE("exp_map identity, pure translation, pure rotation") {
  CHECK(pose_diff(exp_map(Twist::Zero()), Pose::Identity()) == 0.0);

  const Pose tr = exp_map(Twist(1, 0, 0, 0, 0, 0));
  CHECK((tr.rotation - Matrix3::Identity()).norm() < 1e-15);
  CHECK((tr.translation - Vector3(1, 0, 0)).norm() < 1e-15);

  const Pose rz = exp_map(Twist(0, 0, 0, 0, 0, M_PI / 2));
  CHECK((transform_point(rz, Vector3(1, 0, 0)) - Vector3(0, 1, 0)).norm() < 1e-12);
  CHECK(rz.translation.norm() < 1e-15);
}

TEST_CASE("log_map identity and roundtrip at moderate angle") {
  CHECK(log_map(Pose::Identity()).norm() == 0.0);

  const Twist xi(0.4, -0.2, 0.9, 0.3 * 0.6, 0.3 * 0.8, 0.0);  // ||w|| = 0.3
  const Twist back = log_map(exp_map(xi));
  CHECK((back.to_vector() - xi.to_vector()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log_map branch cut is a hard error near pi") {
  const Twist xi(0, 0, 0, 0, 0, M_PI - 5e-7);
  CHECK_THROWS_AS(log_map(exp_map(xi)), BranchCutError);
  // just inside the principal domain
  const Twist ok(0, 0, 0, 0, 0, M_PI - 2e-6);
  CHECK_NOTHROW(log_map(exp_map(ok)));
}

TEST_CASE("compose identities") {
  Rng rng(11);
  const Pose p = random_pose(rng);
  CHECK(pose_diff(compose(Pose::Identity(), p), p) == 0.0);
  CHECK(pose_diff(compose(p, inverse(p)), Pose::Identity()) < 1e-12);

  const Pose t1 = Pose::from_translation(Vector3(1, 0, 0));
  const Pose t2 = Pose::from_translation(Vector3(0, 2, 0));
  CHECK((compose(t1, t2).translation - Vector3(1, 2, 0)).norm() < 1e-15);
}

TEST_CASE("inverse basics") {
  CHECK(pose_diff(inverse(Pose::Identity()), Pose::Identity()) == 0.0);
  const Pose tr = Pose::from_translation(Vector3(1, 2, 3));
  CHECK((inverse(tr).translation + Vector3(1, 2, 3)).norm() < 1e-15);

  const Pose rz = exp_map(Twist(0, 0, 0, 0, 0, 0.7));
  const Pose rz_neg = exp_map(Twist(0, 0, 0, 0, 0, -0.7));
  CHECK(pose_diff(inverse(rz), rz_neg) < 1e-14);
}

TEST_CASE("adjoint identity and translation cross-product form") {
  Rng rng(22);
  const Twist xi(rng.normal3(), rng.normal3());
  const Twist same = adjoint(Pose::Identity(), xi);
  CHECK((same.to_vector() - xi.to_vector()).norm() == 0.0);

  const Vector3 t(0.3, -1.1, 2.0);
  const Vector3 w(0.5, 0.25, -0.75);
  const Twist ad = adjoint(Pose::from_translation(t), Twist(Vector3::Zero(), w));
  CHECK((ad.v - t.cross(w)).norm() < 1e-15);
  CHECK((ad.w - w).norm() == 0.0);
}

TEST_CASE("adjoint satisfies the conjugation identity on 1000 random pairs") {
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng);
    const Twist xi(rng.normal3() * 0.5, rng.normal3() * 0.5);
    const Pose lhs = exp_map(adjoint(p, xi));
    const Pose rhs = compose(compose(p, exp_map(xi)), inverse(p));
    REQUIRE(pose_diff(lhs, rhs) < 1e-9);
  }
}

TEST_CASE("pose_error basics and left invariance") {
  Rng rng(44);
  const Pose p = random_pose(rng);
  CHECK(pose_error(p, p).norm() < 1e-12);

  const Twist xi(0.1, 0.2, -0.3, 0.2, -0.1, 0.15);
  const Twist got = pose_error(Pose::Identity(), exp_map(xi));
  CHECK((got.to_vector() - xi.to_vector()).norm() < 1e-12);

  const Twist a(0.5, -0.2, 0.1, 0.4, 0.2, -0.3);
  const Twist b(-0.1, 0.3, 0.2, 0.1, -0.2, 0.25);
  const Twist err = pose_error(exp_map(a), compose(exp_map(a), exp_map(b)));
  CHECK((err.to_vector() - b.to_vector()).norm() < 1e-9);
}

TEST_CASE("pose_error unwind: exp(pose_error(x,y)) = x^-1 y") {
  Rng rng(55);
  for (int i = 0; i < 200; ++i) {
    const Pose x = random_pose(rng);
    const Pose y = random_pose(rng);
    const Pose rel = compose(inverse(x), y);
    CHECK(pose_diff(exp_map(pose_error(x, y)), rel) < 1e-9);
  }
}

TEST_CASE("transform_point basics") {
  CHECK((transform_point(Pose::Identity(), Vector3(0.1, 0.2, 0.3)) -
         Vector3(0.1, 0.2, 0.3)).norm() == 0.0);
  CHECK((transform_point(Pose::from_translation(Vector3(1, 0, 0)), Vector3::Zero()) -
         Vector3(1, 0, 0)).norm() == 0.0);
  const Pose rz = exp_map(Twist(0, 0, 0, 0, 0, M_PI / 2));
  CHECK((transform_point(rz, Vector3(1, 0, 0)) - Vector3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("roundtrip holds componentwise to 1e-9 across magnitudes") {
  Rng rng(66);
  const double mags[] = {1e-10, 1e-9, 1e-7, 1e-5, 1e-3, 0.1, 0.3, 1.0, 2.0, M_PI - 1e-3};
  for (double mag : mags) {
    for (int i = 0; i < 50; ++i) {
      const Twist xi(rng.normal3(), rng.unit_vector3() * mag);
      const Twist back = log_map(exp_map(xi));
      REQUIRE((back.to_vector() - xi.to_vector()).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("orthonormality survives 10^4 random compositions") {
  Rng rng(77);
  Pose acc = Pose::Identity();
  for (int i = 0; i < 10000; ++i) {
    acc = compose(acc, random_pose(rng));
  }
  const Matrix3 gram = acc.rotation.transpose() * acc.rotation;
  CHECK((gram - Matrix3::Identity()).norm() < 1e-9);
  CHECK(std::abs(acc.rotation.determinant() - 1.0) < 1e-9);
}

TEST_CASE("pose invariants: rotation stays special orthogonal") {
  Rng rng(88);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    CHECK((p.rotation.transpose() * p.rotation - Matrix3::Identity()).norm() < 1e-9);
    CHECK(std::abs(p.rotation.determinant() - 1.0) < 1e-9);
    CHECK(pose_diff(compose(p, inverse(p)), Pose::Identity()) < 1e-9);
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artic/synth_data.hpp"

using namespace artic;

namespace {

double pose_diff(const Pose& a, const Pose& b) {
  return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

}  // namespace

TEST_CASE("ground truth generation is deterministic") {
  SceneSpec spec{JointType::Revolute, 12, 1.2, 0.0, 0.0, 42};
  const GroundTruth a = generate_ground_truth(spec);
  const GroundTruth b = generate_ground_truth(spec);
  REQUIRE(a.poses_a.size() == b.poses_a.size());
  for (std::size_t t = 0; t < a.poses_a.size(); ++t) {
    CHECK(pose_diff(a.poses_a[t], b.poses_a[t]) == 0.0);
    CHECK(pose_diff(a.poses_b[t], b.poses_b[t]) == 0.0);
  }
  CHECK((a.joint.nu.to_vector() - b.joint.nu.to_vector()).norm() == 0.0);

  SceneSpec other = spec;
  other.seed = 43;
  const GroundTruth c = generate_ground_truth(other);
  CHECK(pose_diff(a.poses_b[3], c.poses_b[3]) > 1e-6);
}

TEST_CASE("overall position mean is centered at zero") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
    SceneSpec spec{JointType::Prismatic, 9, 0.4, 0.0, 0.0, seed};
    const GroundTruth gt = generate_ground_truth(spec);
    Vector3 mean = Vector3::Zero();
    for (int t = 0; t < spec.T; ++t) {
      mean += gt.poses_a[t].translation + gt.poses_b[t].translation;
    }
    mean /= 2.0 * spec.T;
    REQUIRE(mean.norm() < 1e-12);
  }
}

TEST_CASE("relative pose at t=0 equals the stored twist frame") {
  SceneSpec spec{JointType::Revolute, 7, 0.9, 0.0, 0.0, 5};
  const GroundTruth gt = generate_ground_truth(spec);
  const Pose rel0 = compose(inverse(gt.poses_a[0]), gt.poses_b[0]);
  CHECK(pose_diff(rel0, gt.joint.t_twist) < 1e-12);
  CHECK(gt.joint.q_seq[0] == 0.0);
}

TEST_CASE("construction identity holds at every timestep to 1e-12") {
  for (JointType jt : {JointType::Revolute, JointType::Prismatic}) {
    SceneSpec spec{jt, 15, jt == JointType::Prismatic ? 0.4 : 1.5708, 0.0, 0.0, 31};
    const GroundTruth gt = generate_ground_truth(spec);
    for (int t = 0; t < spec.T; ++t) {
      const Pose predicted = compose(
          gt.poses_a[t], f_twist(gt.joint.q_seq[t], gt.joint.nu, gt.joint.t_twist));
      REQUIRE(pose_diff(predicted, gt.poses_b[t]) < 1e-12);
      // linear ramp 0 -> q_max
      REQUIRE(gt.joint.q_seq[t] ==
              Catch::Approx(spec.q_max * t / (spec.T - 1)).margin(1e-15));
    }
  }
}

TEST_CASE("joint-type structure of the ground-truth twist") {
  SceneSpec p_spec{JointType::Prismatic, 6, 0.2, 0.0, 0.0, 8};
  const GroundTruth p_gt = generate_ground_truth(p_spec);
  CHECK(p_gt.joint.nu.w.norm() == 0.0);

  SceneSpec r_spec{JointType::Revolute, 6, 1.0, 0.0, 0.0, 8};
  const GroundTruth r_gt = generate_ground_truth(r_spec);
  CHECK(std::abs(r_gt.joint.nu.w.norm() - 1.0) < 1e-12);
  CHECK(std::abs(r_gt.joint.nu.v.dot(r_gt.joint.nu.w)) < 1e-12);
}

TEST_CASE("T < 2 is rejected") {
  SceneSpec spec{JointType::Revolute, 1, 1.0, 0.0, 0.0, 0};
  CHECK_THROWS_AS(generate_ground_truth(spec), ConfigError);
}

TEST_CASE("zero-noise perturbation returns ground truth exactly") {
  SceneSpec spec{JointType::Revolute, 5, 1.0, 0.0, 0.0, 17};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto obs = perturb_poses(gt, spec);
  REQUIRE(obs.size() == 10);
  for (const auto& o : obs) {
    const Pose& truth = (o.part == 0 ? gt.poses_a : gt.poses_b)[o.t];
    REQUIRE(pose_diff(o.pose, truth) < 1e-15);
  }
}

TEST_CASE("perturbation draws are seeded and reproducible") {
  SceneSpec spec{JointType::Prismatic, 8, 0.3, 0.01, 0.02, 23};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto a = perturb_poses(gt, spec);
  const auto b = perturb_poses(gt, spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(pose_diff(a[i].pose, b[i].pose) == 0.0);
  }
}

TEST_CASE("perturbation statistics: variance within 5%, mean within 3 SE") {
  SceneSpec spec{JointType::Revolute, 2, 0.1, 0.02, 0.005, 77};
  const GroundTruth gt = generate_ground_truth(spec);

  // variance over 1e4 draws (5000 scenes x 2 poses of part a)
  double pos_sq = 0.0;
  int n = 0;
  Vector6 mean_twist = Vector6::Zero();
  const int scenes = 5000;
  for (int s = 0; s < scenes; ++s) {
    SceneSpec sp = spec;
    sp.seed = 1000 + s;
    const auto obs = perturb_poses(gt, sp);
    for (const auto& o : obs) {
      const Pose& truth = (o.part == 0 ? gt.poses_a : gt.poses_b)[o.t];
      const Twist perp = log_map(compose(inverse(truth), o.pose));
      pos_sq += perp.v.squaredNorm();
      mean_twist += perp.to_vector();
      n += 1;
    }
  }
  const double var_per_axis = pos_sq / (3.0 * n);
  CHECK(var_per_axis == Catch::Approx(spec.sigma_pos * spec.sigma_pos).epsilon(0.05));

  // unbiasedness: each component's mean within 3 standard errors of zero
  mean_twist /= n;
  for (int i = 0; i < 6; ++i) {
    const double sigma = i < 3 ? spec.sigma_pos : spec.sigma_ori;
    REQUIRE(std::abs(mean_twist[i]) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("center/delta derivation") {
  SceneSpec spec{JointType::Revolute, 9, 1.1, 0.0, 0.0, 55};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto obs = derive_center_delta_observations({gt.poses_a, gt.poses_b});

  int centers = 0, deltas = 0;
  for (const auto& o : obs) {
    if (o.kind == ObsKind::Center) {
      ++centers;
      const Pose& truth = (o.part == 0 ? gt.poses_a : gt.poses_b)[o.t];
      REQUIRE((o.center - truth.translation).norm() == 0.0);
    } else {
      REQUIRE(o.kind == ObsKind::Delta);
      ++deltas;
      const auto& poses = o.part == 0 ? gt.poses_a : gt.poses_b;
      // static part a: all deltas zero
      if (o.part == 0) REQUIRE(o.delta.norm() < 1e-12);
      // reconstruction: Exp(delta) x^(t) = x^(t+1)
      const Pose rebuilt = compose(exp_map(o.delta), poses[o.t]);
      REQUIRE(pose_diff(rebuilt, poses[o.t + 1]) < 1e-9);
    }
  }
  CHECK(centers == 18);
  CHECK(deltas == 16);
}

TEST_CASE("motion maps: beta peaks at the projected center") {
  // hand-built static scene with the mover centered on the optical axis
  GroundTruth gt;
  gt.poses_a = {Pose::from_translation(Vector3(0.3, 0.2, 0.0)),
                Pose::from_translation(Vector3(0.3, 0.2, 0.0))};
  gt.poses_b = {Pose::Identity(), Pose::Identity()};
  gt.joint.q_seq = {0.0, 0.0};
  ImageConfig img;

  const auto maps = generate_motion_maps(gt, img, NoiseSpec{0.0, 0.0}, 3);
  REQUIRE(maps.size() == 1);
  const MotionMap& map = maps[0];
  REQUIRE(map.part_present[1]);
  // part b projects exactly onto pixel (width/2, height/2)
  const int center_idx = (img.height / 2) * img.width + img.width / 2;
  CHECK(map.part_id[center_idx] == 1);
  CHECK(map.beta[center_idx] == 1.0);
}

TEST_CASE("motion maps: zero jitter gives identical per-part features") {
  SceneSpec spec{JointType::Revolute, 4, 0.8, 0.0, 0.0, 91};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto maps = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.0, 0.0}, spec.seed);
  REQUIRE(maps.size() == 3);
  for (const auto& map : maps) {
    for (int part = 0; part < 2; ++part) {
      if (!map.part_present[part]) continue;
      Vector3 ref;
      Twist ref_delta;
      bool first = true;
      for (int i = 0; i < map.size(); ++i) {
        if (map.part_id[i] != part) continue;
        if (first) {
          ref = map.center[i];
          ref_delta = map.delta[i];
          first = false;
        } else {
          REQUIRE((map.center[i] - ref).norm() == 0.0);
          REQUIRE((map.delta[i].to_vector() - ref_delta.to_vector()).norm() == 0.0);
        }
      }
      REQUIRE(!first);
    }
    // static base part carries zero deltas on its pixels
    for (int i = 0; i < map.size(); ++i) {
      if (map.part_id[i] == 0) REQUIRE(map.delta[i].norm() < 1e-12);
    }
  }
}

TEST_CASE("motion maps: off-screen part is flagged missing") {
  GroundTruth gt;
  gt.poses_a = {Pose::Identity(), Pose::Identity()};
  gt.poses_b = {Pose::from_translation(Vector3(50.0, 0.0, 0.0)),
                Pose::from_translation(Vector3(50.0, 0.0, 0.0))};
  gt.joint.q_seq = {0.0, 0.0};
  const auto maps = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.0, 0.0}, 1);
  REQUIRE(maps.size() == 1);
  CHECK(maps[0].part_present[0]);
  CHECK(!maps[0].part_present[1]);
}

TEST_CASE("motion maps are deterministic in the seed") {
  SceneSpec spec{JointType::Prismatic, 3, 0.3, 0.0, 0.0, 7};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto a = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.005, 0.005}, 7);
  const auto b = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.005, 0.005}, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t m = 0; m < a.size(); ++m) {
    REQUIRE(a[m].beta == b[m].beta);
    for (int i = 0; i < a[m].size(); ++i) {
      REQUIRE((a[m].center[i] - b[m].center[i]).norm() == 0.0);
    }
  }
}

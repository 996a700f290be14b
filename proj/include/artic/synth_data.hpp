#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "artic/errors.hpp"
#include "artic/factor_graph.hpp"
#include "artic/joint.hpp"
#include "artic/lie.hpp"
#include "artic/observation.hpp"
#include "artic/rng.hpp"

namespace artic {

// Synthetic two-part scene: joint type, horizon, actuation range (meters for
// prismatic, radians for revolute), pose noise, seed. Substreams are derived
// from the seed: 0 = geometry, 1 = pose perturbation, 2 = motion maps.
struct SceneSpec {
  JointType joint_type = JointType::Revolute;
  int T = 10;
  double q_max = M_PI / 2;
  double sigma_pos = 0.0;
  double sigma_ori = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<Pose> poses_a, poses_b;
  JointModel joint;  // x_b^(t) = x_a^(t) * t_twist * Exp(q_seq[t] * nu)
  Vector3 grasp_point = Vector3::Zero();  // mover center at t = 0
};

// Scene construction: static base with a random orientation, random joint
// frames T_aj / T_jb (uniform orientation, positions uniform in [-0.5, 0.5] m
// per axis), canonical unit twist per joint type, linear q ramp 0 -> q_max,
// then all positions shifted so the overall position mean is zero.
inline GroundTruth generate_ground_truth(const SceneSpec& spec) {
  if (spec.T < 2) throw ConfigError("scene: T must be >= 2");
  Rng rng(derive_seed(spec.seed, 0));

  const Pose x_a(rng.rotation_uniform(), Vector3::Zero());
  const auto sample_frame = [&rng]() {
    const Matrix3 r = rng.rotation_uniform();
    const Vector3 t(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    return Pose(r, t);
  };
  const Pose t_aj = sample_frame();
  const Pose t_jb = sample_frame();

  Twist nu_canonical;
  switch (spec.joint_type) {
    case JointType::Prismatic:
      nu_canonical = Twist(rng.unit_vector3(), Vector3::Zero());
      break;
    case JointType::Revolute:
      nu_canonical = Twist(Vector3::Zero(), rng.unit_vector3());
      break;
    default:
      nu_canonical = rng.unit_twist6();
      break;
  }

  GroundTruth gt;
  gt.joint.t_twist = compose(t_aj, t_jb);
  gt.joint.nu = adjoint(inverse(t_jb), nu_canonical);
  gt.joint.q_seq.resize(spec.T);
  gt.poses_a.reserve(spec.T);
  gt.poses_b.reserve(spec.T);

  for (int t = 0; t < spec.T; ++t) {
    const double q = spec.q_max * static_cast<double>(t) / (spec.T - 1);
    gt.joint.q_seq[t] = q;
    gt.poses_a.push_back(x_a);
    gt.poses_b.push_back(
        compose(compose(x_a, t_aj), compose(exp_map(q * nu_canonical), t_jb)));
  }

  Vector3 mean = Vector3::Zero();
  for (int t = 0; t < spec.T; ++t) mean += gt.poses_a[t].translation + gt.poses_b[t].translation;
  mean /= 2.0 * spec.T;
  for (int t = 0; t < spec.T; ++t) {
    gt.poses_a[t].translation -= mean;
    gt.poses_b[t].translation -= mean;
  }

  gt.grasp_point = gt.poses_b[0].translation;
  return gt;
}

// The true joint twist in the camera frame, the quantity the tangent metric
// compares against.
inline Twist true_camera_twist(const GroundTruth& gt) {
  return twist_in_camera_frame(gt.joint, gt.poses_a[0]);
}

// Noisy full-pose observations: z = x * Exp(nu_perp) with nu_perp drawn from
// the diagonal Gaussian diag(sigma_pos^2 x3, sigma_ori^2 x3). Draw order is
// part a over all t, then part b.
inline std::vector<Observation> perturb_poses(const GroundTruth& gt, const SceneSpec& spec) {
  Rng rng(derive_seed(spec.seed, 1));
  std::vector<Observation> obs;
  obs.reserve(2 * spec.T);
  for (int part = 0; part < 2; ++part) {
    const auto& poses = part == 0 ? gt.poses_a : gt.poses_b;
    for (int t = 0; t < spec.T; ++t) {
      Observation o;
      o.part = part;
      o.t = t;
      o.kind = ObsKind::FullPose;
      o.pose = compose(poses[t], exp_map(rng.normal_twist(spec.sigma_pos, spec.sigma_ori)));
      obs.push_back(o);
    }
  }
  return obs;
}

// Center + delta observations derived from per-part pose sequences (ground
// truth or noisy). Delta^(t) = Log(x^(t+1) (x^(t))^-1), the world-frame left
// delta consumed by residual_obs_delta.
inline std::vector<Observation> derive_center_delta_observations(
    const std::array<std::vector<Pose>, 2>& poses) {
  const int T = static_cast<int>(poses[0].size());
  if (T < 2 || poses[1].size() != poses[0].size()) {
    throw DataError("derive_center_delta_observations: need two pose tracks with T >= 2");
  }
  std::vector<Observation> obs;
  obs.reserve(2 * (2 * T - 1));
  for (int part = 0; part < 2; ++part) {
    for (int t = 0; t < T; ++t) {
      Observation c;
      c.part = part;
      c.t = t;
      c.kind = ObsKind::Center;
      c.center = poses[part][t].translation;
      obs.push_back(c);
    }
    for (int t = 0; t + 1 < T; ++t) {
      Observation d;
      d.part = part;
      d.t = t;
      d.kind = ObsKind::Delta;
      d.delta = log_map(compose(poses[part][t + 1], inverse(poses[part][t])));
      obs.push_back(d);
    }
  }
  return obs;
}

// --- Synthetic motion maps ----------------------------------------------------

// Fixed pinhole over the scene: the camera sits at (0, 0, -camera_distance)
// looking along +z with the scene frame's axes, so projection of a scene point
// p is (cx + focal*x/(z+d), cy + focal*y/(z+d)). Per-pixel features stay in
// the scene frame.
struct ImageConfig {
  int width = 64;
  int height = 48;
  double focal = 50.0;
  double disk_radius = 8.0;
  double beta_decay = 0.25;  // beta = exp(-decay * pixel distance to center)
  double camera_distance = 2.5;
};

// Dense per-pixel motion features for one consecutive-frame pair: importance
// beta in [0, 1], part center c, delta pose from t to t+1. part_id is the
// generator's truth channel (-1 for background).
struct MotionMap {
  int t = 0;
  int width = 0, height = 0;
  std::vector<double> beta;
  std::vector<Vector3> center;
  std::vector<Twist> delta;
  std::vector<int> part_id;
  std::array<bool, 2> part_present = {false, false};

  int size() const { return width * height; }
};

// One map per consecutive frame pair (T-1 maps). Each visible part paints a
// pixel disk around its projected center: beta decays exponentially with the
// pixel distance, c and delta get Gaussian jitter from `jitter`. Background
// pixels carry near-zero importance and junk features. A part whose center
// projects outside the image is flagged missing for that timestep.
inline std::vector<MotionMap> generate_motion_maps(const GroundTruth& gt,
                                                   const ImageConfig& img,
                                                   const NoiseSpec& jitter,
                                                   std::uint64_t seed) {
  const int T = static_cast<int>(gt.poses_a.size());
  Rng rng(derive_seed(seed, 2));
  const double cx = img.width / 2.0;
  const double cy = img.height / 2.0;

  std::vector<MotionMap> maps;
  maps.reserve(T - 1);
  for (int t = 0; t + 1 < T; ++t) {
    MotionMap map;
    map.t = t;
    map.width = img.width;
    map.height = img.height;
    const int n = map.size();
    map.beta.resize(n);
    map.center.resize(n);
    map.delta.resize(n);
    map.part_id.assign(n, -1);
    std::vector<double> owner_dist(n, 0.0);

    // background, row-major
    for (int i = 0; i < n; ++i) {
      map.beta[i] = rng.uniform(0.0, 0.01);
      map.center[i] = Vector3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0));
      map.delta[i] = rng.normal_twist(0.01, 0.01);
    }

    for (int part = 0; part < 2; ++part) {
      const auto& poses = part == 0 ? gt.poses_a : gt.poses_b;
      const Vector3 c_t = poses[t].translation;
      const Twist delta_t = log_map(compose(poses[t + 1], inverse(poses[t])));

      const double z_cam = c_t.z() + img.camera_distance;
      if (z_cam < 0.1) continue;
      const double u = cx + img.focal * c_t.x() / z_cam;
      const double v = cy + img.focal * c_t.y() / z_cam;
      if (u < 0.0 || u >= img.width || v < 0.0 || v >= img.height) continue;
      map.part_present[part] = true;

      const double r = img.disk_radius;
      const int iy0 = std::max(0, static_cast<int>(std::ceil(v - r)));
      const int iy1 = std::min(img.height - 1, static_cast<int>(std::floor(v + r)));
      const int ix0 = std::max(0, static_cast<int>(std::ceil(u - r)));
      const int ix1 = std::min(img.width - 1, static_cast<int>(std::floor(u + r)));
      for (int iy = iy0; iy <= iy1; ++iy) {
        for (int ix = ix0; ix <= ix1; ++ix) {
          const double dist = std::hypot(ix - u, iy - v);
          if (dist > r) continue;
          // Jitter draws happen for every disk pixel, so ownership decisions
          // never shift the stream.
          const Vector3 c_jit = jitter.sigma_pos * rng.normal3();
          const Twist d_jit = rng.normal_twist(jitter.sigma_pos, jitter.sigma_ori);
          const int i = iy * img.width + ix;
          if (map.part_id[i] >= 0 && owner_dist[i] <= dist) continue;
          map.part_id[i] = part;
          owner_dist[i] = dist;
          map.beta[i] = std::exp(-img.beta_decay * dist);
          map.center[i] = c_t + c_jit;
          map.delta[i] = delta_t + d_jit;
        }
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

}  // namespace artic

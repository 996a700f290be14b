#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artic/clustering.hpp"
#include "artic/synth_data.hpp"

using namespace artic;

namespace {

MotionMap tiny_map(const std::vector<double>& betas, int width = 4) {
  MotionMap m;
  m.width = width;
  m.height = static_cast<int>(betas.size()) / width;
  m.beta = betas;
  m.center.assign(betas.size(), Vector3::Zero());
  m.delta.assign(betas.size(), Twist::Zero());
  m.part_id.assign(betas.size(), -1);
  return m;
}

// Affinity of two well-separated pixel groups with identical features inside
// each group.
std::vector<PixelFeature> two_block_features(int n1, int n2) {
  std::vector<PixelFeature> px;
  for (int i = 0; i < n1 + n2; ++i) {
    PixelFeature f;
    f.index = i;
    f.beta = 1.0;
    f.center = i < n1 ? Vector3(0, 0, 0) : Vector3(1, 0, 0);
    f.delta = Twist::Zero();
    px.push_back(f);
  }
  return px;
}

}  // namespace

TEST_CASE("select_top_pixels basics and tie-breaks") {
  MotionMap all = tiny_map({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const auto everything = select_top_pixels(all, 8);
  CHECK(everything.size() == 8);

  MotionMap one = tiny_map({0, 0, 0, 0, 1.0, 0, 0, 0});
  const auto top = select_top_pixels(one, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].index == 4);
  CHECK(top[0].beta == 1.0);

  MotionMap equal = tiny_map(std::vector<double>(8, 0.5));
  const auto first3 = select_top_pixels(equal, 3);
  CHECK(first3[0].index == 0);
  CHECK(first3[1].index == 1);
  CHECK(first3[2].index == 2);

  CHECK_THROWS_AS(select_top_pixels(all, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_top_pixels(all, 9), std::invalid_argument);
}

TEST_CASE("affinity matrix: diagonal exactly 2, symmetric, kernel values") {
  auto px = two_block_features(3, 2);
  const Eigen::MatrixXd a = build_affinity(px, 0.05);
  for (int i = 0; i < a.rows(); ++i) CHECK(a(i, i) == 2.0);
  CHECK((a - a.transpose()).norm() == 0.0);
  // identical features: affinity 2; 1 m apart: 2 exp(-200) ~ 0
  CHECK(a(0, 1) == 2.0);
  CHECK(a(0, 3) < 1e-15);

  // direct formula check at 0.1 m separation: 2 exp(-2)
  std::vector<PixelFeature> pair(2);
  pair[0] = {0, 1.0, Vector3(0, 0, 0), Twist::Zero()};
  pair[1] = {1, 1.0, Vector3(0.1, 0, 0), Twist::Zero()};
  const Eigen::MatrixXd a2 = build_affinity(pair, 0.05);
  CHECK(a2(0, 1) == Catch::Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));

  // a rigid common delta preserves pairwise distances, so both kernel terms agree
  for (auto& f : pair) f.delta = Twist(0.02, -0.01, 0.03, 0.1, 0.2, -0.05);
  const Eigen::MatrixXd a3 = build_affinity(pair, 0.05);
  CHECK(a3(0, 1) == Catch::Approx(2.0 * std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("estimate_num_clusters on block affinities") {
  const auto two = two_block_features(12, 9);
  CHECK(estimate_num_clusters(build_affinity(two)) == 2);

  const auto one = two_block_features(15, 0);
  CHECK(estimate_num_clusters(build_affinity(one)) == 1);

  CHECK_THROWS_AS(estimate_num_clusters(Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 4))),
                  std::invalid_argument);
}

TEST_CASE("cluster_pixels: K=1, block recovery, determinism, validation") {
  const auto px = two_block_features(10, 7);
  const Eigen::MatrixXd a = build_affinity(px);
  const SpectralDecomposition dec = decompose_affinity(a);

  const auto single = cluster_pixels(dec.u, 1, 5);
  CHECK(std::set<int>(single.begin(), single.end()).size() == 1);

  const auto two = cluster_pixels(dec.u, 2, 5);
  // matches the block partition up to label permutation
  for (int i = 1; i < 10; ++i) REQUIRE(two[i] == two[0]);
  for (int i = 11; i < 17; ++i) REQUIRE(two[i] == two[10]);
  REQUIRE(two[0] != two[10]);

  CHECK(cluster_pixels(dec.u, 2, 5) == two);
  CHECK_THROWS_AS(cluster_pixels(dec.u, 18, 5), std::invalid_argument);
  CHECK_THROWS_AS(cluster_pixels(dec.u, 0, 5), std::invalid_argument);
}

TEST_CASE("aggregate_clusters: weighted means and validation") {
  std::vector<PixelFeature> px(3);
  px[0] = {0, 1.0, Vector3(0, 0, 0), Twist(1, 0, 0, 0, 0, 0)};
  px[1] = {1, 3.0, Vector3(4, 0, 0), Twist(0, 0, 0, 0, 0, 2)};
  px[2] = {2, 0.5, Vector3(9, 9, 9), Twist::Zero()};

  const auto dets = aggregate_clusters({0, 0, 1}, px);
  REQUIRE(dets.size() == 2);
  // beta-weighted mean: (1*0 + 3*4)/4 = 3
  CHECK((dets[0].center - Vector3(3, 0, 0)).norm() < 1e-15);
  CHECK(dets[0].delta.v.x() == Catch::Approx(0.25));
  CHECK(dets[0].delta.w.z() == Catch::Approx(1.5));
  CHECK(dets[0].support == 2);
  CHECK(dets[0].mean_importance == Catch::Approx(2.0));
  // single-pixel cluster passes its features through
  CHECK((dets[1].center - Vector3(9, 9, 9)).norm() == 0.0);
  CHECK(dets[1].support == 1);

  // uniform weights reduce to the arithmetic mean
  for (auto& f : px) f.beta = 0.7;
  const auto uniform = aggregate_clusters({0, 0, 0}, px);
  CHECK((uniform[0].center - Vector3(13.0 / 3, 3, 3)).norm() < 1e-12);

  for (auto& f : px) f.beta = 0.0;
  CHECK_THROWS_AS(aggregate_clusters({0, 0, 0}, px), std::invalid_argument);
}

TEST_CASE("aggregate_clusters is invariant to cluster relabeling") {
  std::vector<PixelFeature> px(4);
  px[0] = {0, 0.9, Vector3(0, 0, 0), Twist::Zero()};
  px[1] = {1, 0.8, Vector3(0.01, 0, 0), Twist::Zero()};
  px[2] = {2, 0.7, Vector3(1, 0, 0), Twist::Zero()};
  px[3] = {3, 0.6, Vector3(1.01, 0, 0), Twist::Zero()};
  const auto a = aggregate_clusters({0, 0, 1, 1}, px);
  const auto b = aggregate_clusters({1, 1, 0, 0}, px);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE((a[i].center - b[i].center).norm() == 0.0);
    REQUIRE(a[i].support == b[i].support);
  }
}

TEST_CASE("match_detections: static part, disappearance, crossing paths") {
  // single static part over 4 steps
  std::vector<PartTrajectory> trajs;
  PartDetection still;
  still.center = Vector3(1, 2, 3);
  still.delta = Twist::Zero();
  still.support = 5;
  for (int t = 0; t < 4; ++t) match_detections(trajs, {still}, t);
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].centers.size() == 4);
  CHECK(trajs[0].missing_count == 0);
  for (const auto& d : trajs[0].deltas) CHECK(d.norm() == 0.0);

  // disappearing then reappearing detection: one static fill
  trajs.clear();
  match_detections(trajs, {still}, 0);
  match_detections(trajs, {}, 1);
  match_detections(trajs, {still}, 2);
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].centers.size() == 3);
  CHECK(trajs[0].missing_count == 1);

  // two parts whose predicted centers disambiguate crossing paths
  trajs.clear();
  PartDetection right;
  right.center = Vector3(0, 0, 0);
  right.delta = Twist(Vector3(0.6, 0, 0), Vector3::Zero());
  PartDetection left;
  left.center = Vector3(1, 0, 0);
  left.delta = Twist(Vector3(-0.6, 0, 0), Vector3::Zero());
  match_detections(trajs, {right, left}, 0);
  // at t=1 the tracks have crossed: predicted centers are 0.6 and 0.4
  PartDetection right_now;
  right_now.center = Vector3(0.62, 0, 0);
  right_now.delta = Twist(Vector3(0.6, 0, 0), Vector3::Zero());
  PartDetection left_now;
  left_now.center = Vector3(0.38, 0, 0);
  left_now.delta = Twist(Vector3(-0.6, 0, 0), Vector3::Zero());
  match_detections(trajs, {left_now, right_now}, 1);
  REQUIRE(trajs.size() == 2);
  CHECK((trajs[0].centers[1] - Vector3(0.62, 0, 0)).norm() == 0.0);
  CHECK((trajs[1].centers[1] - Vector3(0.38, 0, 0)).norm() == 0.0);
}

TEST_CASE("match_detections: late detections spawn back-filled trajectories") {
  std::vector<PartTrajectory> trajs;
  PartDetection a;
  a.center = Vector3::Zero();
  match_detections(trajs, {a}, 0);
  match_detections(trajs, {a}, 1);

  PartDetection fresh;
  fresh.center = Vector3(5, 0, 0);
  fresh.delta = Twist(Vector3(0.1, 0, 0), Vector3::Zero());
  match_detections(trajs, {a, fresh}, 2);

  REQUIRE(trajs.size() == 2);
  // every trajectory has exactly one entry per elapsed timestep
  for (const auto& tr : trajs) REQUIRE(tr.centers.size() == 3);
  CHECK(trajs[1].missing_count == 2);
  CHECK((trajs[1].centers[0] - Vector3(5, 0, 0)).norm() == 0.0);
  CHECK(trajs[1].deltas[0].norm() == 0.0);
  CHECK(trajs[1].deltas[2].v.x() == Catch::Approx(0.1));
}

TEST_CASE("select_base_and_mover") {
  PartTrajectory still;
  still.centers = {Vector3(0, 0, 0), Vector3(0, 0, 0), Vector3(0, 0, 0)};
  still.deltas.assign(3, Twist::Zero());

  PartTrajectory moving = still;
  moving.centers = {Vector3(0, 0, 0), Vector3(0.5, 0, 0), Vector3(1, 0, 0)};

  {
    const auto [base, mover] = select_base_and_mover({still, moving});
    CHECK(base == 0);
    CHECK(mover == 1);
  }
  {
    // two static trajectories: second has slightly higher variance
    PartTrajectory wiggle = still;
    wiggle.centers[1] = Vector3(0.01, 0, 0);
    const auto [base, mover] = select_base_and_mover({still, wiggle});
    CHECK(base == 0);
    CHECK(mover == 1);
  }
  {
    // mover = fewest missing detections among the non-base trajectories
    PartTrajectory reliable = moving;
    reliable.missing_count = 0;
    PartTrajectory flaky = moving;
    flaky.missing_count = 2;
    const auto [base, mover] = select_base_and_mover({flaky, still, reliable});
    CHECK(base == 1);
    CHECK(mover == 2);
  }
  CHECK_THROWS_AS(select_base_and_mover({still}), DataError);
}

TEST_CASE("pipeline recovery on a zero-jitter synthetic scene") {
  SceneSpec spec{JointType::Revolute, 6, 1.0, 0.0, 0.0, 202};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto maps = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.0, 0.0}, spec.seed);

  std::vector<PartTrajectory> trajs;
  for (const auto& map : maps) {
    const int n = std::min(256, map.size());
    const auto px = select_top_pixels(map, n);
    const Eigen::MatrixXd a = build_affinity(px);
    const SpectralDecomposition dec = decompose_affinity(a);
    const int k = estimate_num_clusters_from_spectrum(dec.singular_values);
    REQUIRE(k == 2);
    const auto assignment = cluster_pixels(dec.u, k, 11 + map.t);
    const auto dets = aggregate_clusters(assignment, px);
    REQUIRE(dets.size() == 2);
    // aggregated centers coincide with the true part centers
    for (const auto& det : dets) {
      const double d0 = (det.center - gt.poses_a[map.t].translation).norm();
      const double d1 = (det.center - gt.poses_b[map.t].translation).norm();
      REQUIRE(std::min(d0, d1) < 1e-6);
    }
    match_detections(trajs, dets, map.t);
  }
  REQUIRE(trajs.size() == 2);
  const auto [base, mover] = select_base_and_mover(trajs);
  // the base trajectory must follow part a (the static part)
  CHECK((trajs[base].centers[0] - gt.poses_a[0].translation).norm() < 1e-6);
  CHECK((trajs[mover].centers[0] - gt.poses_b[0].translation).norm() < 1e-6);
}

TEST_CASE("matching conservation on a jittered scene") {
  SceneSpec spec{JointType::Prismatic, 8, 0.4, 0.0, 0.0, 303};
  const GroundTruth gt = generate_ground_truth(spec);
  const auto maps = generate_motion_maps(gt, ImageConfig{}, NoiseSpec{0.005, 0.005}, 303);

  std::vector<PartTrajectory> trajs;
  std::size_t prev_count = 0;
  for (const auto& map : maps) {
    const auto px = select_top_pixels(map, std::min(256, map.size()));
    const SpectralDecomposition dec = decompose_affinity(build_affinity(px));
    const int k = estimate_num_clusters_from_spectrum(dec.singular_values);
    const auto dets = aggregate_clusters(cluster_pixels(dec.u, k, map.t), px);
    match_detections(trajs, dets, map.t);
    REQUIRE(trajs.size() >= prev_count);
    prev_count = trajs.size();
    for (const auto& tr : trajs) {
      REQUIRE(tr.centers.size() == static_cast<std::size_t>(map.t) + 1);
      REQUIRE(tr.deltas.size() == tr.centers.size());
    }
  }
}

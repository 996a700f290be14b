#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "artic/errors.hpp"
#include "artic/lie.hpp"
#include "artic/rng.hpp"
#include "artic/synth_data.hpp"

namespace artic {

struct PixelFeature {
  int index = 0;  // row-major pixel index
  double beta = 0.0;
  Vector3 center = Vector3::Zero();
  Twist delta;
};

struct PartDetection {
  Vector3 center = Vector3::Zero();
  Twist delta;
  int support = 0;
  double mean_importance = 0.0;
};

// One tracked part: per-timestep centers and deltas; missing_count counts
// timesteps filled by the static assumption.
struct PartTrajectory {
  std::vector<Vector3> centers;
  std::vector<Twist> deltas;
  int missing_count = 0;
};

// The N highest-importance pixels; ties broken by row-major pixel index.
inline std::vector<PixelFeature> select_top_pixels(const MotionMap& map, int n) {
  if (n <= 0) throw std::invalid_argument("select_top_pixels: N must be positive");
  if (n > map.size()) throw std::invalid_argument("select_top_pixels: N exceeds pixel count");
  std::vector<int> order(map.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (map.beta[a] != map.beta[b]) return map.beta[a] > map.beta[b];
    return a < b;
  });
  std::vector<PixelFeature> out(n);
  for (int i = 0; i < n; ++i) {
    const int idx = order[i];
    out[i] = {idx, map.beta[idx], map.center[idx], map.delta[idx]};
  }
  return out;
}

// A_ij = exp(||c_i - c_j||^2 / -2 sigma_A^2) + exp(||c~_i - c~_j||^2 / -2 sigma_A^2)
// with c~ = Exp(delta) c, the delta-advanced center. Symmetric, diagonal
// exactly 2.
inline Eigen::MatrixXd build_affinity(const std::vector<PixelFeature>& pixels,
                                      double sigma_a = 0.05) {
  const int n = static_cast<int>(pixels.size());
  std::vector<Vector3> advanced(n);
  for (int i = 0; i < n; ++i) {
    advanced[i] = transform_point(exp_map(pixels[i].delta), pixels[i].center);
  }
  const double inv = -1.0 / (2.0 * sigma_a * sigma_a);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = std::exp(inv * (pixels[i].center - pixels[j].center).squaredNorm()) +
                       std::exp(inv * (advanced[i] - advanced[j]).squaredNorm());
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

struct SpectralDecomposition {
  Eigen::MatrixXd u;
  Eigen::VectorXd singular_values;  // descending
};

inline SpectralDecomposition decompose_affinity(const Eigen::MatrixXd& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  return {svd.matrixU(), svd.singularValues()};
}

// Number of clusters from the affinity spectrum: K(alpha) counts singular
// values above alpha times the sum of the first M; alpha runs over 100
// log-spaced samples of [1e-4, 1] and the histogram mode wins (ties toward
// smaller K).
inline int estimate_num_clusters_from_spectrum(const Eigen::VectorXd& singular_values, int m = 9) {
  const int n = static_cast<int>(singular_values.size());
  if (n == 0 || singular_values[0] <= 0.0) {
    throw std::invalid_argument("estimate_num_clusters: affinity matrix is all zero");
  }
  double head_sum = 0.0;
  for (int i = 0; i < std::min(m, n); ++i) head_sum += singular_values[i];

  constexpr int kAlphaSamples = 100;
  std::map<int, int> histogram;
  for (int s = 0; s < kAlphaSamples; ++s) {
    const double alpha =
        std::pow(10.0, -4.0 + 4.0 * static_cast<double>(s) / (kAlphaSamples - 1));
    int k = 0;
    while (k < n && singular_values[k] > alpha * head_sum) ++k;
    ++histogram[k];
  }
  int best_k = 0, best_count = -1;
  for (const auto& [k, count] : histogram) {
    if (count > best_count) {  // map iterates ascending, so ties keep smaller K
      best_k = k;
      best_count = count;
    }
  }
  return best_k;
}

inline int estimate_num_clusters(const Eigen::MatrixXd& affinity, int m = 9) {
  return estimate_num_clusters_from_spectrum(decompose_affinity(affinity).singular_values, m);
}

// Seeded k-means (k-means++ init) on the first K columns of U. Fixed 50
// iterations or centroid convergence below 1e-9.
inline std::vector<int> cluster_pixels(const Eigen::MatrixXd& u, int k, std::uint64_t seed) {
  const int n = static_cast<int>(u.rows());
  if (k < 1) throw std::invalid_argument("cluster_pixels: K must be >= 1");
  if (k > n) throw std::invalid_argument("cluster_pixels: K exceeds point count");
  const Eigen::MatrixXd pts = u.leftCols(k);

  Rng rng(seed);
  Eigen::MatrixXd centroids(k, k);
  // k-means++: first centroid uniform, then D^2-weighted.
  int first = static_cast<int>(rng.uniform01() * n);
  if (first >= n) first = n - 1;
  centroids.row(0) = pts.row(first);
  Eigen::VectorXd d2 = (pts.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      for (; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target <= 0.0) break;
      }
    } else {
      pick = static_cast<int>(rng.uniform01() * n);
      if (pick >= n) pick = n - 1;
    }
    centroids.row(c) = pts.row(pick);
    d2 = d2.cwiseMin((pts.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assignment(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (pts.row(i) - centroids.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          assignment[i] = c;
        }
      }
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < n; ++i) {
      next.row(assignment[i]) += pts.row(i);
      counts[assignment[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        next.row(c) /= counts[c];
      } else {
        // revive an empty cluster at the point farthest from its centroid
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (pts.row(i) - centroids.row(assignment[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next.row(c) = pts.row(far);
      }
    }
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < 1e-9) break;
  }
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = (pts.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        assignment[i] = c;
      }
    }
  }
  return assignment;
}

// Importance-weighted per-cluster means:
//   c_k = sum(beta_n c_n) / sum(beta_n),  delta_k likewise componentwise.
// Detections are ordered by the smallest member pixel index so relabeling the
// clusters never changes the output set.
inline std::vector<PartDetection> aggregate_clusters(const std::vector<int>& assignment,
                                                     const std::vector<PixelFeature>& pixels) {
  if (assignment.size() != pixels.size() || pixels.empty()) {
    throw std::invalid_argument("aggregate_clusters: assignment/pixel size mismatch");
  }
  std::map<int, std::vector<int>> members;  // cluster -> pixel positions
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[assignment[i]].push_back(static_cast<int>(i));
  }
  std::vector<std::pair<int, const std::vector<int>*>> ordered;
  for (const auto& [label, idx] : members) {
    int min_pixel = pixels[idx.front()].index;
    for (int i : idx) min_pixel = std::min(min_pixel, pixels[i].index);
    ordered.emplace_back(min_pixel, &idx);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<PartDetection> out;
  out.reserve(ordered.size());
  for (const auto& [min_pixel, idx] : ordered) {
    double beta_sum = 0.0;
    Vector3 c = Vector3::Zero();
    Twist d;
    for (int i : *idx) {
      const auto& px = pixels[i];
      beta_sum += px.beta;
      c += px.beta * px.center;
      d.v += px.beta * px.delta.v;
      d.w += px.beta * px.delta.w;
    }
    if (beta_sum <= 0.0) {
      throw std::invalid_argument("aggregate_clusters: cluster with zero total importance");
    }
    PartDetection det;
    det.center = c / beta_sum;
    det.delta = Twist(d.v / beta_sum, d.w / beta_sum);
    det.support = static_cast<int>(idx->size());
    det.mean_importance = beta_sum / static_cast<double>(idx->size());
    out.push_back(det);
  }
  return out;
}

// Append the detections for timestep t (0-based; trajectories currently hold
// entries for 0..t-1). Greedy nearest-predicted-center matching in ascending
// distance order; unmatched detections spawn back-filled trajectories,
// unmatched trajectories extend statically.
inline void match_detections(std::vector<PartTrajectory>& trajectories,
                             const std::vector<PartDetection>& detections, int t) {
  const int l_count = static_cast<int>(trajectories.size());
  const int k_count = static_cast<int>(detections.size());

  std::vector<bool> traj_used(l_count, false), det_used(k_count, false);
  if (t > 0 && l_count > 0 && k_count > 0) {
    struct Pair {
      double dist;
      int l, k;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(l_count) * k_count);
    for (int l = 0; l < l_count; ++l) {
      const Vector3 predicted = transform_point(exp_map(trajectories[l].deltas[t - 1]),
                                                trajectories[l].centers[t - 1]);
      for (int k = 0; k < k_count; ++k) {
        pairs.push_back({(predicted - detections[k].center).norm(), l, k});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      if (a.l != b.l) return a.l < b.l;
      return a.k < b.k;
    });
    for (const auto& pr : pairs) {
      if (traj_used[pr.l] || det_used[pr.k]) continue;
      traj_used[pr.l] = true;
      det_used[pr.k] = true;
      trajectories[pr.l].centers.push_back(detections[pr.k].center);
      trajectories[pr.l].deltas.push_back(detections[pr.k].delta);
    }
  }

  // previously tracked part not detected now: assume it did not move
  for (int l = 0; l < l_count; ++l) {
    if (traj_used[l] || t == 0) continue;
    trajectories[l].centers.push_back(trajectories[l].centers[t - 1]);
    trajectories[l].deltas.push_back(Twist::Zero());
    trajectories[l].missing_count += 1;
  }

  // new detections: assume the part did not previously move
  for (int k = 0; k < k_count; ++k) {
    if (det_used[k]) continue;
    PartTrajectory traj;
    traj.centers.assign(t + 1, detections[k].center);
    traj.deltas.assign(t + 1, Twist::Zero());
    traj.deltas[t] = detections[k].delta;
    traj.missing_count = t;
    trajectories.push_back(std::move(traj));
  }
}

// Base part = lowest center variance (trace of the sample covariance over
// time); mover = fewest missing detections among the rest. Ties pick the
// lower index.
inline std::pair<int, int> select_base_and_mover(const std::vector<PartTrajectory>& trajectories) {
  if (trajectories.size() < 2) {
    throw DataError("select_base_and_mover: need at least two trajectories");
  }
  int base = 0;
  double best_var = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < trajectories.size(); ++l) {
    const auto& c = trajectories[l].centers;
    Vector3 mean = Vector3::Zero();
    for (const auto& p : c) mean += p;
    mean /= static_cast<double>(c.size());
    double var = 0.0;
    for (const auto& p : c) var += (p - mean).squaredNorm();
    var /= static_cast<double>(c.size());
    if (var < best_var) {
      best_var = var;
      base = static_cast<int>(l);
    }
  }
  int mover = -1;
  for (std::size_t l = 0; l < trajectories.size(); ++l) {
    if (static_cast<int>(l) == base) continue;
    if (mover < 0 || trajectories[l].missing_count < trajectories[mover].missing_count) {
      mover = static_cast<int>(l);
    }
  }
  return {base, mover};
}

}  // namespace artic

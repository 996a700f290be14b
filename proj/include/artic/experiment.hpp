#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "artic/clustering.hpp"
#include "artic/errors.hpp"
#include "artic/factor_graph.hpp"
#include "artic/joint.hpp"
#include "artic/lm_solver.hpp"
#include "artic/observation.hpp"
#include "artic/synth_data.hpp"
#include "artic/tangent_metric.hpp"

namespace artic {

enum class ObservationMode { Pose, CenterDelta };

inline std::string to_string(ObservationMode m) {
  return m == ObservationMode::Pose ? "pose" : "center_delta";
}

inline ObservationMode observation_mode_from_string(const std::string& s) {
  if (s == "pose") return ObservationMode::Pose;
  if (s == "center_delta") return ObservationMode::CenterDelta;
  throw ConfigError("unknown observation mode '" + s + "'");
}

// Sweep over the synthetic-pose experiment grid. Defaults reproduce the
// benchmark grid: T in {5..320}, three motion ranges per joint type, three
// position and orientation noise levels, 50 runs per cell.
struct SweepConfig {
  std::vector<JointType> joint_types = {JointType::Revolute, JointType::Prismatic};
  std::vector<int> horizons = {5, 10, 20, 40, 80, 160, 320};
  std::vector<double> q_max_revolute = {15.0 * M_PI / 180.0, 45.0 * M_PI / 180.0,
                                        90.0 * M_PI / 180.0};
  std::vector<double> q_max_prismatic = {0.05, 0.2, 0.4};
  std::vector<double> sigma_pos = {0.001, 0.03, 0.1};
  std::vector<double> sigma_ori = {1.0 * M_PI / 180.0, 3.0 * M_PI / 180.0,
                                   10.0 * M_PI / 180.0};
  int runs_per_cell = 50;
  ObservationMode mode = ObservationMode::Pose;
  JointType joint_constraint = JointType::Unconstrained;
  SolverConfig solver;
  std::uint64_t master_seed = 0;
  int threads = 1;

  const std::vector<double>& q_max_grid(JointType t) const {
    return t == JointType::Prismatic ? q_max_prismatic : q_max_revolute;
  }
};

struct ResultRow {
  std::string joint_type;
  int horizon = 0;
  double q_max = 0.0, sigma_pos = 0.0, sigma_ori = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double similarity = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
  double wall_ms = 0.0;  // measured; excluded from determinism guarantees
};

namespace detail {

// Seed substream indices per run seed: 0 ground truth, 1 pose perturbation,
// 2 motion maps, 3 solver restarts, 4 clustering.
constexpr std::uint64_t kSubGroundTruth = 0;
constexpr std::uint64_t kSubPerturb = 1;
constexpr std::uint64_t kSubMaps = 2;
constexpr std::uint64_t kSubSolver = 3;
constexpr std::uint64_t kSubCluster = 4;

constexpr double kSigmaFloor = 1e-4;  // whitening floor when generation noise is ~0

inline NoiseSpec problem_noise(double sigma_pos, double sigma_ori) {
  return NoiseSpec{std::max(sigma_pos, kSigmaFloor), std::max(sigma_ori, kSigmaFloor)};
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace detail

// The grasping point used by the harness: the moving part's (index 1) first
// observed center, falling back to the true grasp point if nothing observes it.
inline Vector3 default_grasp_point(const std::vector<Observation>& obs,
                                   const GroundTruth& gt) {
  for (const auto& o : obs) {
    if (o.part != 1 || o.t != 0) continue;
    if (o.kind == ObsKind::FullPose) return o.pose.translation;
    if (o.kind == ObsKind::Center) return o.center;
  }
  return gt.grasp_point;
}

// Tangent similarity of an estimated model against scene truth. The predicted
// twist is mapped to the camera frame via the estimated base pose and T_ab,
// and its sign is aligned with the recovered q trend (the true ramp always
// increases, and (nu, q) -> (-nu, -q) is a gauge of the fit).
inline double score_estimate(const GroundTruth& gt, const VariableAssignment& estimate,
                             const Vector3& grasp_x0, double q_max) {
  const Twist nu_true = true_camera_twist(gt);
  Twist nu_pred = twist_in_camera_frame(estimate.joint, estimate.x[0][0]);
  const auto& q = estimate.joint.q_seq;
  if (!q.empty() && q.back() - q.front() < 0.0) nu_pred = -nu_pred;
  GraspSpec g;
  g.x0 = grasp_x0;
  g.q_min = 0.0;
  g.q_max = q_max;
  g.n_samples = 100;
  return tangent_similarity(nu_true, nu_pred, g);
}

// One synthetic-pose estimation run: generate - perturb - solve - score.
inline ResultRow run_single(JointType jt, int horizon, double q_max, double sigma_pos,
                            double sigma_ori, ObservationMode mode, JointType constraint,
                            SolverConfig solver, std::uint64_t seed) {
  ResultRow row;
  row.joint_type = to_string(jt);
  row.horizon = horizon;
  row.q_max = q_max;
  row.sigma_pos = sigma_pos;
  row.sigma_ori = sigma_ori;
  row.seed = seed;

  const auto start = std::chrono::steady_clock::now();
  try {
    SceneSpec spec{jt, horizon, q_max, sigma_pos, sigma_ori, seed};
    const GroundTruth gt = generate_ground_truth(spec);
    std::vector<Observation> obs = perturb_poses(gt, spec);
    if (mode == ObservationMode::CenterDelta) {
      std::array<std::vector<Pose>, 2> noisy;
      noisy[0].resize(horizon);
      noisy[1].resize(horizon);
      for (const auto& o : obs) noisy[o.part][o.t] = o.pose;
      obs = derive_center_delta_observations(noisy);
    }
    const Problem problem =
        build_problem(obs, detail::problem_noise(sigma_pos, sigma_ori), constraint);
    solver.master_seed = derive_seed(seed, detail::kSubSolver);
    solver.threads = 1;
    const SolveResult result = solve(problem, solver);
    row.final_cost = result.final_cost;
    row.iterations = result.iterations;
    row.restart_index = result.restart_index;
    row.converged = result.converged;
    if (!std::isfinite(result.final_cost)) {
      row.error = "solver failed: no restart produced a finite cost";
    } else {
      row.similarity =
          score_estimate(gt, result.assignment, default_grasp_point(obs, gt), q_max);
      row.ok = true;
    }
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start).count();
  return row;
}

// Full grid sweep. Every (cell, run) pair becomes a row (failures included);
// rows come back in canonical grid order and are a pure function of the
// config apart from wall_ms, regardless of thread count.
inline std::vector<ResultRow> run_sweep(const SweepConfig& cfg) {
  if (cfg.runs_per_cell < 1) throw ConfigError("sweep: runs_per_cell must be >= 1");
  if (cfg.joint_types.empty() || cfg.horizons.empty() || cfg.sigma_pos.empty() ||
      cfg.sigma_ori.empty()) {
    throw ConfigError("sweep: all grids must be non-empty");
  }
  for (JointType jt : cfg.joint_types) {
    if (cfg.q_max_grid(jt).empty()) throw ConfigError("sweep: q_max grid must be non-empty");
  }

  struct Task {
    JointType jt;
    int horizon;
    double q_max, sigma_pos, sigma_ori;
    int run;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  std::uint64_t cell = 0;
  for (JointType jt : cfg.joint_types) {
    for (int T : cfg.horizons) {
      for (double qm : cfg.q_max_grid(jt)) {
        for (double sp : cfg.sigma_pos) {
          for (double so : cfg.sigma_ori) {
            const std::uint64_t cell_seed = derive_seed(cfg.master_seed, cell++);
            for (int run = 0; run < cfg.runs_per_cell; ++run) {
              tasks.push_back({jt, T, qm, sp, so, run,
                               derive_seed(cell_seed, static_cast<std::uint64_t>(run))});
            }
          }
        }
      }
    }
  }

  std::vector<ResultRow> rows(tasks.size());
  const auto work = [&](std::size_t i) {
    const Task& t = tasks[i];
    rows[i] = run_single(t.jt, t.horizon, t.q_max, t.sigma_pos, t.sigma_ori, cfg.mode,
                         cfg.joint_constraint, cfg.solver, t.seed);
    rows[i].run = t.run;
  };

  const int workers = std::max(cfg.threads, 1);
  if (workers <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
          work(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return rows;
}

// --- CSV emission -------------------------------------------------------------

inline const char* result_csv_header() {
  return "joint_type,T,q_max,sigma_pos,sigma_ori,run,seed,status,similarity,final_cost,"
         "iterations,restart_index,converged,wall_ms";
}

inline std::string result_rows_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << result_csv_header() << "\n";
  for (const auto& r : rows) {
    os << r.joint_type << ',' << r.horizon << ',' << detail::fmt(r.q_max) << ','
       << detail::fmt(r.sigma_pos) << ',' << detail::fmt(r.sigma_ori) << ',' << r.run << ','
       << r.seed << ',' << (r.ok ? "ok" : "error: " + detail::sanitize(r.error)) << ',';
    if (r.ok) os << detail::fmt(r.similarity) << ',' << detail::fmt(r.final_cost);
    else os << ',';
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    os << ',' << r.iterations << ',' << r.restart_index << ',' << (r.converged ? 1 : 0)
       << ',' << wall << "\n";
  }
  return os.str();
}

// Nearest-rank percentile (no interpolation): the smallest value with at
// least p percent of the sample at or below it.
inline double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) / 100.0));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

// Per-group aggregate CSV (median/p25/p75 of similarity over ok rows).
// Groups appear in first-occurrence order of the canonical row order.
inline std::string emit_plot_data(const std::vector<ResultRow>& rows,
                                  const std::vector<std::string>& keys) {
  if (rows.empty()) throw DataError("emit_plot_data: empty result table");
  const auto key_value = [](const ResultRow& r, const std::string& key) -> std::string {
    if (key == "joint_type") return r.joint_type;
    if (key == "T") return std::to_string(r.horizon);
    if (key == "q_max") return detail::fmt(r.q_max);
    if (key == "sigma_pos") return detail::fmt(r.sigma_pos);
    if (key == "sigma_ori") return detail::fmt(r.sigma_ori);
    throw DataError("emit_plot_data: unknown grouping key '" + key + "'");
  };

  std::vector<std::string> group_order;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : rows) {
    std::string gk;
    for (const auto& k : keys) gk += key_value(r, k) + ",";
    if (groups.find(gk) == groups.end()) group_order.push_back(gk);
    auto& bucket = groups[gk];
    if (r.ok) bucket.push_back(r.similarity);
  }

  std::ostringstream os;
  for (const auto& k : keys) os << k << ',';
  os << "median,p25,p75,n\n";
  for (const auto& gk : group_order) {
    const auto& vals = groups[gk];
    os << gk;
    if (vals.empty()) {
      os << ",,,0\n";
    } else {
      os << detail::fmt(nearest_rank_percentile(vals, 50.0)) << ','
         << detail::fmt(nearest_rank_percentile(vals, 25.0)) << ','
         << detail::fmt(nearest_rank_percentile(vals, 75.0)) << ',' << vals.size() << "\n";
    }
  }
  return os.str();
}

// --- External observation files ------------------------------------------------

struct IngestedObservations {
  std::vector<Observation> observations;
  int horizon = 0;
};

// Validated observation list + inferred horizon from a JSON Lines file. A
// header-declared horizon may extend the inferred one but never contradict it.
inline IngestedObservations ingest_observations(const std::string& path) {
  ObservationFile f = read_observations_file(path);
  if (f.observations.empty()) throw DataError("'" + path + "': no observation records");
  int inferred = 0;
  for (const auto& o : f.observations) {
    inferred = std::max(inferred, o.t + (o.kind == ObsKind::Delta ? 2 : 1));
  }
  int horizon = inferred;
  if (f.header && f.header->horizon) {
    if (*f.header->horizon < inferred) {
      throw DataError("'" + path + "': inconsistent horizons: header declares T=" +
                      std::to_string(*f.header->horizon) + " but records imply T>=" +
                      std::to_string(inferred));
    }
    horizon = *f.header->horizon;
  }
  return {std::move(f.observations), horizon};
}

// --- End-to-end synthetic pipeline ---------------------------------------------

struct PipelineConfig {
  SceneSpec scene;
  ImageConfig image;
  NoiseSpec jitter{0.0, 0.0};  // per-pixel feature jitter (may be zero)
  int n_top = 256;
  double sigma_a = 0.05;
  int m_singular = 9;
  JointType joint_constraint = JointType::Unconstrained;
  SolverConfig solver;
};

struct PipelineResult {
  ResultRow row;
  GroundTruth gt;
  std::vector<int> clusters_per_map;
  std::vector<std::vector<PartDetection>> detections;
  std::vector<PartTrajectory> trajectories;
  int base = -1, mover = -1;
  std::vector<Observation> observations;  // base as part 0, mover as part 1
  JointModel estimated;                   // normalized for reporting
  SolveResult solve_result;
};

// Motion maps -> spectral clustering -> trajectory matching -> part selection
// -> center+delta factor graph -> tangent similarity. Operates on an injected
// ground truth so degenerate scenes are constructible in tests.
inline PipelineResult run_pipeline_on(const GroundTruth& gt, const PipelineConfig& cfg) {
  PipelineResult out;
  out.gt = gt;
  ResultRow& row = out.row;
  row.joint_type = to_string(cfg.scene.joint_type);
  row.horizon = cfg.scene.T;
  row.q_max = cfg.scene.q_max;
  row.sigma_pos = cfg.jitter.sigma_pos;
  row.sigma_ori = cfg.jitter.sigma_ori;
  row.seed = cfg.scene.seed;

  const auto start = std::chrono::steady_clock::now();
  try {
    const auto maps = generate_motion_maps(gt, cfg.image, cfg.jitter, cfg.scene.seed);
    const std::uint64_t cluster_seed = derive_seed(cfg.scene.seed, detail::kSubCluster);

    for (const auto& map : maps) {
      const int n = std::min(cfg.n_top, map.size());
      const auto pixels = select_top_pixels(map, n);
      const Eigen::MatrixXd affinity = build_affinity(pixels, cfg.sigma_a);
      const SpectralDecomposition dec = decompose_affinity(affinity);
      const int k = estimate_num_clusters_from_spectrum(dec.singular_values, cfg.m_singular);
      out.clusters_per_map.push_back(k);
      const auto assignment =
          cluster_pixels(dec.u, k, derive_seed(cluster_seed, static_cast<std::uint64_t>(map.t)));
      auto dets = aggregate_clusters(assignment, pixels);
      match_detections(out.trajectories, dets, map.t);
      out.detections.push_back(std::move(dets));
    }

    if (out.trajectories.size() < 2) {
      std::ostringstream diag;
      diag << "clustering failure: " << out.trajectories.size()
           << " part trajectories (need 2); clusters per map:";
      for (int k : out.clusters_per_map) diag << ' ' << k;
      throw DataError(diag.str());
    }
    std::tie(out.base, out.mover) = select_base_and_mover(out.trajectories);

    const int L = static_cast<int>(out.trajectories[out.base].centers.size());
    for (int part = 0; part < 2; ++part) {
      const auto& traj = out.trajectories[part == 0 ? out.base : out.mover];
      for (int t = 0; t < L; ++t) {
        Observation c;
        c.part = part;
        c.t = t;
        c.kind = ObsKind::Center;
        c.center = traj.centers[t];
        out.observations.push_back(c);
        Observation d;
        d.part = part;
        d.t = t;
        d.kind = ObsKind::Delta;
        d.delta = traj.deltas[t];
        out.observations.push_back(d);
      }
    }

    const Problem problem =
        build_problem(out.observations,
                      detail::problem_noise(cfg.jitter.sigma_pos, cfg.jitter.sigma_ori),
                      cfg.joint_constraint);
    SolverConfig solver = cfg.solver;
    solver.master_seed = derive_seed(cfg.scene.seed, detail::kSubSolver);
    solver.threads = 1;
    out.solve_result = solve(problem, solver);
    row.final_cost = out.solve_result.final_cost;
    row.iterations = out.solve_result.iterations;
    row.restart_index = out.solve_result.restart_index;
    row.converged = out.solve_result.converged;
    if (!std::isfinite(out.solve_result.final_cost)) {
      row.error = "solver failed: no restart produced a finite cost";
    } else {
      out.estimated = normalize_joint_model(out.solve_result.assignment.joint);
      row.similarity = score_estimate(gt, out.solve_result.assignment,
                                      out.trajectories[out.mover].centers[0],
                                      cfg.scene.q_max);
      row.ok = true;
    }
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start).count();
  return out;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  return run_pipeline_on(generate_ground_truth(cfg.scene), cfg);
}

}  // namespace artic

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "artic/errors.hpp"
#include "artic/factor_graph.hpp"
#include "artic/rng.hpp"

namespace artic {

struct SolverConfig {
  int restarts = 10;  // P
  int max_iters = 100;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double cost_rel_tol = 1e-9;
  double grad_tol = 1e-10;
  std::uint64_t master_seed = 0;
  int threads = 1;  // restart-level parallelism; result is identical at any count
};

struct SolveResult {
  VariableAssignment assignment;
  double final_cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
  std::vector<double> accepted_costs;  // cost after each accepted step
};

namespace lm_detail {

constexpr double kFdStep = 1e-6;
constexpr double kLambdaMax = 1e12;
constexpr double kLambdaMin = 1e-12;

// Local chart for the joint twist under a type constraint. The constraint is
// enforced by construction of the retraction, never by penalty:
//   unconstrained: nu + d                                (6 params)
//   prismatic:     (v + dv, 0)                           (3 params)
//   revolute:      point/axis chart (p + dp_perp, w + dw) with v = -w x p
//                  (5 params; dp lives in the plane normal to w, which
//                  removes the slide-along-axis null direction)
struct NuChart {
  JointType type = JointType::Unconstrained;

  int dim() const {
    switch (type) {
      case JointType::Prismatic: return 3;
      case JointType::Revolute: return 5;
      default: return 6;
    }
  }

  Twist retract(const Twist& nu, const Eigen::VectorXd& d) const {
    switch (type) {
      case JointType::Prismatic:
        return Twist(nu.v + Vector3(d[0], d[1], d[2]), Vector3::Zero());
      case JointType::Revolute: {
        const double w2 = nu.w.squaredNorm();
        if (w2 < 1e-18) {
          throw DegeneracyError("revolute chart: ||w|| collapsed below 1e-9");
        }
        const Vector3 p = nu.w.cross(nu.v) / w2;  // axis point closest to origin
        const Vector3 wn = nu.w / std::sqrt(w2);
        int k = 0;
        wn.cwiseAbs().minCoeff(&k);
        const Vector3 e1 = wn.cross(Vector3::Unit(k)).normalized();
        const Vector3 e2 = wn.cross(e1);
        const Vector3 p_new = p + d[0] * e1 + d[1] * e2;
        const Vector3 w_new = nu.w + Vector3(d[2], d[3], d[4]);
        return Twist(-w_new.cross(p_new), w_new);
      }
      default:
        return Twist(nu.v + Vector3(d[0], d[1], d[2]), nu.w + Vector3(d[3], d[4], d[5]));
    }
  }
};

// Column offsets: poses interleaved by timestep, then q^(1..T-1) (q^(0) is
// eliminated), then T_ab, then the nu chart.
struct Layout {
  int horizon = 0;
  int nu_dim = 6;

  int pose_off(int part, int t) const { return 12 * t + 6 * part; }
  int q_off(int t) const { return 12 * horizon + (t - 1); }
  int tt_off() const { return 12 * horizon + (horizon - 1); }
  int nu_off() const { return tt_off() + 6; }
  int total() const { return nu_off() + nu_dim; }
};

inline Layout make_layout(const Problem& p, const NuChart& chart) {
  Layout l;
  l.horizon = p.horizon;
  l.nu_dim = chart.dim();
  return l;
}

// Variables one factor depends on, copied out so finite differencing never
// touches the full assignment.
struct LocalVars {
  Pose pose0, pose1, tt;
  Twist nu;
  double q = 0.0;
};

enum class Slot { Pose0, Pose1, TT, Nu, Q };

struct BlockRef {
  Slot slot;
  int offset;
  int dim;
};

inline LocalVars extract_vars(const Factor& f, const VariableAssignment& v) {
  LocalVars lv;
  switch (f.kind) {
    case FactorKind::PoseObs:
    case FactorKind::CenterObs:
    case FactorKind::OrientPrior:
      lv.pose0 = v.x[f.part][f.t];
      break;
    case FactorKind::DeltaObs:
      lv.pose0 = v.x[f.part][f.t];
      lv.pose1 = v.x[f.part][f.t + 1];
      break;
    case FactorKind::Exp:
      lv.pose0 = v.x[0][f.t];
      lv.pose1 = v.x[1][f.t];
      lv.tt = v.joint.t_twist;
      lv.nu = v.joint.nu;
      lv.q = v.joint.q_seq[f.t];
      break;
    case FactorKind::NormPrior:
      lv.nu = v.joint.nu;
      break;
  }
  return lv;
}

inline Eigen::VectorXd eval_local(const Factor& f, const LocalVars& lv) {
  switch (f.kind) {
    case FactorKind::PoseObs:
      return residual_obs_pose(lv.pose0, f.z_pose).to_vector();
    case FactorKind::CenterObs:
      return residual_obs_center(lv.pose0, f.z_center);
    case FactorKind::DeltaObs:
      return residual_obs_delta(lv.pose0, lv.pose1, f.z_delta).to_vector();
    case FactorKind::Exp:
      return residual_exp(lv.pose0, lv.pose1, lv.tt, lv.nu, lv.q).to_vector();
    case FactorKind::OrientPrior: {
      Pose rot_only(lv.pose0.rotation, Vector3::Zero());
      return log_map(inverse(rot_only)).w;
    }
    case FactorKind::NormPrior: {
      Eigen::VectorXd r(1);
      r[0] = lv.nu.to_vector().squaredNorm() - 1.0;
      return r;
    }
  }
  return Eigen::VectorXd();
}

inline void perturb(LocalVars& lv, Slot slot, const NuChart& chart, int j, double h) {
  const auto bump_pose = [&](Pose& p) {
    Vector6 d = Vector6::Zero();
    d[j] = h;
    p = compose(exp_map(Twist::from_vector(d)), p);
  };
  switch (slot) {
    case Slot::Pose0: bump_pose(lv.pose0); break;
    case Slot::Pose1: bump_pose(lv.pose1); break;
    case Slot::TT: bump_pose(lv.tt); break;
    case Slot::Nu: {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(chart.dim());
      d[j] = h;
      lv.nu = chart.retract(lv.nu, d);
      break;
    }
    case Slot::Q: lv.q += h; break;
  }
}

inline std::vector<BlockRef> factor_blocks(const Factor& f, const Layout& L) {
  std::vector<BlockRef> blocks;
  switch (f.kind) {
    case FactorKind::PoseObs:
    case FactorKind::CenterObs:
    case FactorKind::OrientPrior:
      blocks.push_back({Slot::Pose0, L.pose_off(f.part, f.t), 6});
      break;
    case FactorKind::DeltaObs:
      blocks.push_back({Slot::Pose0, L.pose_off(f.part, f.t), 6});
      blocks.push_back({Slot::Pose1, L.pose_off(f.part, f.t + 1), 6});
      break;
    case FactorKind::Exp:
      blocks.push_back({Slot::Pose0, L.pose_off(0, f.t), 6});
      blocks.push_back({Slot::Pose1, L.pose_off(1, f.t), 6});
      blocks.push_back({Slot::TT, L.tt_off(), 6});
      blocks.push_back({Slot::Nu, L.nu_off(), L.nu_dim});
      if (f.t >= 1) blocks.push_back({Slot::Q, L.q_off(f.t), 1});
      break;
    case FactorKind::NormPrior:
      blocks.push_back({Slot::Nu, L.nu_off(), L.nu_dim});
      break;
  }
  return blocks;
}

// Central finite-difference Jacobian of one factor w.r.t. one local block,
// in the block's retraction chart.
inline Eigen::MatrixXd block_jacobian_fd(const Factor& f, const LocalVars& lv,
                                         const BlockRef& b, const NuChart& chart) {
  Eigen::MatrixXd jac(f.dim(), b.dim);
  for (int j = 0; j < b.dim; ++j) {
    LocalVars plus = lv;
    perturb(plus, b.slot, chart, j, kFdStep);
    LocalVars minus = lv;
    perturb(minus, b.slot, chart, j, -kFdStep);
    jac.col(j) = (eval_local(f, plus) - eval_local(f, minus)) / (2.0 * kFdStep);
  }
  return jac;
}

}  // namespace lm_detail

// Apply a full local increment to an assignment: poses update by left-applied
// exp_map of the twist increment, configurations additively, nu in its chart.
inline VariableAssignment retract_assignment(const Problem& p, const VariableAssignment& v,
                                             const Eigen::VectorXd& dx) {
  lm_detail::NuChart chart{p.joint_constraint};
  const lm_detail::Layout L = lm_detail::make_layout(p, chart);
  VariableAssignment out = v;
  for (int t = 0; t < p.horizon; ++t) {
    for (int part = 0; part < 2; ++part) {
      const Vector6 d = dx.segment<6>(L.pose_off(part, t));
      out.x[part][t] = compose(exp_map(Twist::from_vector(d)), v.x[part][t]);
    }
    if (t >= 1) out.joint.q_seq[t] = v.joint.q_seq[t] + dx[L.q_off(t)];
  }
  out.joint.t_twist =
      compose(exp_map(Twist::from_vector(dx.segment<6>(L.tt_off()))), v.joint.t_twist);
  out.joint.nu = chart.retract(v.joint.nu, dx.segment(L.nu_off(), L.nu_dim));
  return out;
}

inline int local_dimension(const Problem& p) {
  lm_detail::NuChart chart{p.joint_constraint};
  return lm_detail::make_layout(p, chart).total();
}

struct NormalEquations {
  Eigen::SparseMatrix<double> A;  // J^T W J (Huber-reweighted, whitened)
  Eigen::VectorXd g;              // J^T W r
  double cost = 0.0;              // robustified total cost at the linearization point
};

// Linearize every factor with per-block central finite differences and
// assemble sparse Gauss-Newton normal equations. Residuals are whitened by the
// factor sigmas and scaled by sqrt of the Huber IRLS weight.
inline NormalEquations linearize_normal_equations(const Problem& p,
                                                  const VariableAssignment& v) {
  lm_detail::NuChart chart{p.joint_constraint};
  const lm_detail::Layout L = lm_detail::make_layout(p, chart);
  const int n = L.total();

  NormalEquations ne;
  ne.g = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.factors.size() * 36 + n);
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 0.0);  // keep full diagonal in pattern

  double cost = 0.0;
  for (const Factor& f : p.factors) {
    const lm_detail::LocalVars lv = lm_detail::extract_vars(f, v);
    const Eigen::VectorXd r = lm_detail::eval_local(f, lv);
    const Eigen::VectorXd r_white = (r.array() / f.sigma.array()).matrix();
    const double d = r_white.norm();
    cost += huber(d, p.huber_delta);
    const double w = huber_weight(d, p.huber_delta);
    const Eigen::VectorXd row_scale = (std::sqrt(w) / f.sigma.array()).matrix();

    const auto blocks = lm_detail::factor_blocks(f, L);
    std::vector<Eigen::MatrixXd> jacs;
    jacs.reserve(blocks.size());
    for (const auto& b : blocks) {
      Eigen::MatrixXd jac = lm_detail::block_jacobian_fd(f, lv, b, chart);
      jac.array().colwise() *= row_scale.array();
      jacs.push_back(std::move(jac));
    }
    const Eigen::VectorXd rw = row_scale.asDiagonal() * r;

    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      ne.g.segment(blocks[bi].offset, blocks[bi].dim) += jacs[bi].transpose() * rw;
      for (std::size_t bj = 0; bj < blocks.size(); ++bj) {
        const Eigen::MatrixXd h = jacs[bi].transpose() * jacs[bj];
        for (int a = 0; a < h.rows(); ++a)
          for (int c = 0; c < h.cols(); ++c)
            trips.emplace_back(blocks[bi].offset + a, blocks[bj].offset + c, h(a, c));
      }
    }
  }

  ne.A.resize(n, n);
  ne.A.setFromTriplets(trips.begin(), trips.end());
  ne.cost = cost;
  return ne;
}

// Whitened, IRLS-scaled residual stack and its dense Jacobian, assembled from
// the same per-factor blocks the solver uses. Intended for verification at
// small problem sizes.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_dense_jacobian(
    const Problem& p, const VariableAssignment& v) {
  lm_detail::NuChart chart{p.joint_constraint};
  const lm_detail::Layout L = lm_detail::make_layout(p, chart);
  int m = 0;
  for (const auto& f : p.factors) m += f.dim();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, L.total());
  Eigen::VectorXd r_all = Eigen::VectorXd::Zero(m);

  int row = 0;
  for (const Factor& f : p.factors) {
    const lm_detail::LocalVars lv = lm_detail::extract_vars(f, v);
    const Eigen::VectorXd r = lm_detail::eval_local(f, lv);
    const double d = (r.array() / f.sigma.array()).matrix().norm();
    const double w = huber_weight(d, p.huber_delta);
    const Eigen::VectorXd row_scale = (std::sqrt(w) / f.sigma.array()).matrix();
    for (const auto& b : lm_detail::factor_blocks(f, L)) {
      Eigen::MatrixXd jac = lm_detail::block_jacobian_fd(f, lv, b, chart);
      jac.array().colwise() *= row_scale.array();
      J.block(row, b.offset, f.dim(), b.dim) = jac;
    }
    r_all.segment(row, f.dim()) = row_scale.asDiagonal() * r;
    row += f.dim();
  }
  return {J, r_all};
}

namespace lm_detail {

inline void validate(const SolverConfig& cfg) {
  if (cfg.restarts < 1) throw ConfigError("solver: restarts must be >= 1");
  if (cfg.max_iters < 0) throw ConfigError("solver: max_iters must be >= 0");
  if (!(cfg.cost_rel_tol > 0.0) || !(cfg.grad_tol > 0.0)) {
    throw ConfigError("solver: tolerances must be positive");
  }
  if (!(cfg.lambda_up > 1.0) || !(cfg.lambda_down > 0.0) || !(cfg.lambda_down < 1.0)) {
    throw ConfigError("solver: need lambda_up > 1 > lambda_down > 0");
  }
  if (!(cfg.lambda_init > 0.0)) throw ConfigError("solver: lambda_init must be positive");
}

}  // namespace lm_detail

// Random but observation-seeded initialization:
//  - nu: uniform direction, projected into the constraint chart, unit norm
//  - q: linear ramp with slope drawn in [-1, 1]
//  - latent poses: copied from pose observations where present; positions from
//    center observations with random orientation; otherwise forward-integrated
//    through delta observations from a random first pose
//  - T_ab: first relative pose estimate perturbed by a random twist (sigma 0.1)
inline VariableAssignment random_init(const Problem& p, std::uint64_t seed) {
  Rng rng(seed);
  const int T = p.horizon;
  VariableAssignment v;
  v.x[0].resize(T);
  v.x[1].resize(T);
  v.joint.q_seq.assign(T, 0.0);

  // nu (draw order: before everything else)
  for (;;) {
    const Twist raw = rng.unit_twist6();
    if (p.joint_constraint == JointType::Revolute && raw.w.norm() < 0.1) continue;
    const Twist proj = project_joint_type(raw, p.joint_constraint);
    const double n = proj.norm();
    if (n < 0.1) continue;
    v.joint.nu = proj * (1.0 / n);
    break;
  }

  // q ramp
  const double slope = rng.uniform(-1.0, 1.0);
  for (int t = 1; t < T; ++t) v.joint.q_seq[t] = slope * static_cast<double>(t) / (T - 1);

  // observation lookup: first (canonical-order) pose/center/delta per (part, t)
  std::array<std::vector<const Observation*>, 2> pose_at, center_at, delta_at;
  for (int part = 0; part < 2; ++part) {
    pose_at[part].assign(T, nullptr);
    center_at[part].assign(T, nullptr);
    delta_at[part].assign(T, nullptr);
  }
  for (const auto& o : p.observations) {
    auto& slot = (o.kind == ObsKind::FullPose  ? pose_at
                  : o.kind == ObsKind::Center ? center_at
                                              : delta_at)[o.part][o.t];
    if (slot == nullptr) slot = &o;
  }

  for (int part = 0; part < 2; ++part) {
    for (int t = 0; t < T; ++t) {
      if (const Observation* o = pose_at[part][t]) {
        v.x[part][t] = o->pose;
      } else if (const Observation* o = center_at[part][t]) {
        v.x[part][t] = Pose(rng.rotation_uniform(), o->center);
      } else if (t > 0 && delta_at[part][t - 1] != nullptr) {
        v.x[part][t] = compose(exp_map(delta_at[part][t - 1]->delta), v.x[part][t - 1]);
      } else {
        const Vector3 pos(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          rng.uniform(-0.5, 0.5));
        v.x[part][t] = Pose(rng.rotation_uniform(), pos);
      }
    }
  }

  const Pose rel0 = compose(inverse(v.x[0][0]), v.x[1][0]);
  v.joint.t_twist = compose(rel0, exp_map(rng.normal_twist(0.1, 0.1)));
  return v;
}

// Levenberg-Marquardt descent from one initialization. Accepted costs are
// strictly decreasing; terminates on max_iters, relative cost change, or
// gradient norm. Damping failures at lambda_max return best-so-far with
// converged = false.
inline SolveResult solve_single(const Problem& p, const VariableAssignment& init,
                                const SolverConfig& cfg) {
  lm_detail::validate(cfg);
  SolveResult res;
  res.assignment = init;
  res.restart_index = 0;

  double cost = total_cost(p, res.assignment);
  res.final_cost = cost;
  if (!std::isfinite(cost) || cfg.max_iters == 0) {
    res.converged = false;
    return res;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
  double lambda = cfg.lambda_init;

  while (res.iterations < cfg.max_iters) {
    NormalEquations ne;
    try {
      ne = linearize_normal_equations(p, res.assignment);
    } catch (const BranchCutError&) {
      res.converged = false;
      break;
    } catch (const DegeneracyError&) {
      res.converged = false;
      break;
    }

    // stationarity relative to the problem's curvature scale, so heavily
    // whitened problems can still converge at machine-noise residuals
    const double curvature = std::max(1.0, ne.A.diagonal().maxCoeff());
    if (ne.g.lpNorm<Eigen::Infinity>() < cfg.grad_tol * curvature) {
      res.converged = true;
      break;
    }
    if (!analyzed) {
      ldlt.analyzePattern(ne.A);
      analyzed = true;
    }

    const Eigen::VectorXd diag = ne.A.diagonal().cwiseMax(1e-12);
    bool stepped = false;
    while (!stepped) {
      Eigen::SparseMatrix<double> damped = ne.A;
      for (int i = 0; i < damped.rows(); ++i) damped.coeffRef(i, i) += lambda * diag[i];
      ldlt.factorize(damped);

      double new_cost = std::numeric_limits<double>::infinity();
      VariableAssignment candidate;
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd dx = ldlt.solve(-ne.g);
        if (dx.allFinite()) {
          try {
            candidate = retract_assignment(p, res.assignment, dx);
            new_cost = total_cost(p, candidate);
          } catch (const DegeneracyError&) {
            new_cost = std::numeric_limits<double>::infinity();
          }
        }
      }

      if (new_cost < cost) {
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        res.assignment = std::move(candidate);
        cost = new_cost;
        res.accepted_costs.push_back(cost);
        ++res.iterations;
        lambda = std::max(lambda * cfg.lambda_down, lm_detail::kLambdaMin);
        stepped = true;
        if (rel < cfg.cost_rel_tol || cost < 1e-300) {
          res.converged = true;
        }
      } else {
        lambda *= cfg.lambda_up;
        if (lambda > lm_detail::kLambdaMax) {
          res.converged = false;
          res.final_cost = total_cost(p, res.assignment);
          return res;
        }
      }
    }
    if (res.converged) break;
  }

  res.final_cost = total_cost(p, res.assignment);
  return res;
}

// P randomly initialized LM instances; restart i uses seed
// derive_seed(master_seed, i). Returns the lowest final cost (ties broken by
// lowest restart index), independent of execution order and thread count.
inline SolveResult solve(const Problem& p, const SolverConfig& cfg) {
  lm_detail::validate(cfg);
  const int P = cfg.restarts;
  std::vector<SolveResult> results(P);

  const auto run_one = [&](int i) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(i));
    results[i] = solve_single(p, random_init(p, seed), cfg);
    results[i].restart_index = i;
  };

  const int workers = std::min(std::max(cfg.threads, 1), P);
  if (workers <= 1) {
    for (int i = 0; i < P; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < P; i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  int best = -1;
  for (int i = 0; i < P; ++i) {
    if (!std::isfinite(results[i].final_cost)) continue;
    if (best < 0 || results[i].final_cost < results[best].final_cost) best = i;
  }
  if (best < 0) {
    SolveResult fail = results[0];
    fail.final_cost = std::numeric_limits<double>::infinity();
    fail.converged = false;
    fail.restart_index = -1;
    return fail;
  }
  return results[best];
}

}  // namespace artic

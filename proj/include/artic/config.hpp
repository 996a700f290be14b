#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "artic/errors.hpp"
#include "artic/experiment.hpp"

// JSON config parsing shared by the CLI and tests. Every field is optional
// and falls back to the library default; unknown joint types / modes are
// configuration errors.

namespace artic {

namespace config_detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

}  // namespace config_detail

inline SolverConfig parse_solver_config(const nlohmann::json& j) {
  using config_detail::get_or;
  SolverConfig cfg;
  cfg.restarts = get_or(j, "restarts", cfg.restarts);
  cfg.max_iters = get_or(j, "max_iters", cfg.max_iters);
  cfg.lambda_init = get_or(j, "lambda_init", cfg.lambda_init);
  cfg.lambda_up = get_or(j, "lambda_up", cfg.lambda_up);
  cfg.lambda_down = get_or(j, "lambda_down", cfg.lambda_down);
  cfg.cost_rel_tol = get_or(j, "cost_rel_tol", cfg.cost_rel_tol);
  cfg.grad_tol = get_or(j, "grad_tol", cfg.grad_tol);
  cfg.master_seed = get_or(j, "master_seed", cfg.master_seed);
  cfg.threads = get_or(j, "threads", cfg.threads);
  return cfg;
}

inline SweepConfig parse_sweep_config(const nlohmann::json& j) {
  using config_detail::get_or;
  SweepConfig cfg;
  if (j.contains("joint_types")) {
    cfg.joint_types.clear();
    for (const auto& s : j.at("joint_types")) {
      cfg.joint_types.push_back(joint_type_from_string(s.get<std::string>()));
    }
  }
  cfg.horizons = get_or(j, "T", cfg.horizons);
  if (j.contains("q_max")) {
    const auto& q = j.at("q_max");
    cfg.q_max_revolute = config_detail::get_or(q, "revolute", cfg.q_max_revolute);
    cfg.q_max_prismatic = config_detail::get_or(q, "prismatic", cfg.q_max_prismatic);
  }
  cfg.sigma_pos = get_or(j, "sigma_pos", cfg.sigma_pos);
  cfg.sigma_ori = get_or(j, "sigma_ori", cfg.sigma_ori);
  cfg.runs_per_cell = get_or(j, "runs_per_cell", cfg.runs_per_cell);
  if (j.contains("observation_mode")) {
    cfg.mode = observation_mode_from_string(j.at("observation_mode").get<std::string>());
  }
  if (j.contains("joint_constraint")) {
    cfg.joint_constraint = joint_type_from_string(j.at("joint_constraint").get<std::string>());
  }
  if (j.contains("solver")) cfg.solver = parse_solver_config(j.at("solver"));
  cfg.master_seed = get_or(j, "master_seed", cfg.master_seed);
  cfg.threads = get_or(j, "threads", cfg.threads);
  return cfg;
}

inline SceneSpec parse_scene_spec(const nlohmann::json& j) {
  using config_detail::get_or;
  SceneSpec spec;
  if (j.contains("joint_type")) {
    spec.joint_type = joint_type_from_string(j.at("joint_type").get<std::string>());
  }
  spec.T = get_or(j, "T", spec.T);
  spec.q_max = get_or(j, "q_max", spec.q_max);
  spec.sigma_pos = get_or(j, "sigma_pos", spec.sigma_pos);
  spec.sigma_ori = get_or(j, "sigma_ori", spec.sigma_ori);
  spec.seed = get_or(j, "seed", spec.seed);
  return spec;
}

inline ImageConfig parse_image_config(const nlohmann::json& j) {
  using config_detail::get_or;
  ImageConfig img;
  img.width = get_or(j, "width", img.width);
  img.height = get_or(j, "height", img.height);
  img.focal = get_or(j, "focal", img.focal);
  img.disk_radius = get_or(j, "disk_radius", img.disk_radius);
  img.beta_decay = get_or(j, "beta_decay", img.beta_decay);
  img.camera_distance = get_or(j, "camera_distance", img.camera_distance);
  return img;
}

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  using config_detail::get_or;
  PipelineConfig cfg;
  if (j.contains("scene")) cfg.scene = parse_scene_spec(j.at("scene"));
  if (j.contains("image")) cfg.image = parse_image_config(j.at("image"));
  if (j.contains("jitter")) {
    cfg.jitter.sigma_pos = get_or(j.at("jitter"), "sigma_pos", cfg.jitter.sigma_pos);
    cfg.jitter.sigma_ori = get_or(j.at("jitter"), "sigma_ori", cfg.jitter.sigma_ori);
  }
  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    cfg.n_top = get_or(c, "n_top", cfg.n_top);
    cfg.sigma_a = get_or(c, "sigma_A", cfg.sigma_a);
    cfg.m_singular = get_or(c, "M", cfg.m_singular);
  }
  if (j.contains("joint_constraint")) {
    cfg.joint_constraint = joint_type_from_string(j.at("joint_constraint").get<std::string>());
  }
  if (j.contains("solver")) cfg.solver = parse_solver_config(j.at("solver"));
  return cfg;
}

}  // namespace artic

// Command-line harness: synthetic sweeps, the end-to-end motion-map pipeline,
// estimation from external observation files, and metric-only scoring.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "artic/config.hpp"
#include "artic/experiment.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitSolverFailure = 3;

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw artic::ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw artic::ConfigError("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw artic::DataError("cannot open '" + path + "' for writing");
  os << content;
}

artic::Twist parse_twist_or_screw(const json& j, const std::string& what) {
  if (j.contains("twist")) return artic::twist_from_json(j.at("twist"));
  if (j.contains("screw")) {
    const auto& s = j.at("screw");
    artic::ScrewParams sp;
    const auto l = s.at("l").get<std::vector<double>>();
    const auto m = s.at("m").get<std::vector<double>>();
    if (l.size() != 3 || m.size() != 3) throw artic::DataError(what + ": screw l/m need 3 floats");
    sp.l = artic::Vector3(l[0], l[1], l[2]);
    sp.m = artic::Vector3(m[0], m[1], m[2]);
    sp.theta = s.at("theta").get<double>();
    sp.d = s.at("d").get<double>();
    return artic::screw_to_twist(sp);
  }
  throw artic::DataError(what + ": expected a 'twist' or 'screw' entry");
}

std::vector<artic::Twist> parse_twist_sequence(const json& j, const std::string& what) {
  std::vector<artic::Twist> out;
  if (j.contains("twists")) {
    for (const auto& t : j.at("twists")) out.push_back(artic::twist_from_json(t));
  } else if (j.contains("screws")) {
    for (const auto& s : j.at("screws")) {
      out.push_back(parse_twist_or_screw(json{{"screw", s}}, what));
    }
  } else {
    throw artic::DataError(what + ": expected 'twists' or 'screws' for time-indexed scoring");
  }
  return out;
}

json result_row_to_json(const artic::ResultRow& r) {
  json j{{"joint_type", r.joint_type}, {"T", r.horizon},        {"q_max", r.q_max},
         {"sigma_pos", r.sigma_pos},   {"sigma_ori", r.sigma_ori}, {"seed", r.seed},
         {"ok", r.ok},                 {"iterations", r.iterations},
         {"restart_index", r.restart_index}, {"converged", r.converged},
         {"wall_ms", r.wall_ms}};
  if (r.ok) {
    j["similarity"] = r.similarity;
    j["final_cost"] = r.final_cost;
  } else {
    j["error"] = r.error;
  }
  return j;
}

int cmd_sweep(const std::optional<std::string>& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<int> threads) {
  artic::SweepConfig cfg;
  if (config_path) {
    const json j = load_json_file(*config_path);
    cfg = artic::parse_sweep_config(j.contains("sweep") ? j.at("sweep") : j);
  }
  if (seed) cfg.master_seed = *seed;
  if (threads) cfg.threads = *threads;

  std::filesystem::create_directories(out_dir);
  const auto rows = artic::run_sweep(cfg);
  write_text_file(out_dir + "/rows.csv", artic::result_rows_csv(rows));
  write_text_file(out_dir + "/aggregate.csv",
                  artic::emit_plot_data(rows, {"joint_type", "T", "q_max", "sigma_pos",
                                               "sigma_ori"}));
  std::size_t failures = 0;
  for (const auto& r : rows) failures += r.ok ? 0 : 1;
  std::cout << rows.size() << " rows written to " << out_dir << "/rows.csv ("
            << failures << " failures)\n";
  return kExitOk;
}

int cmd_pipeline(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  artic::PipelineConfig cfg = artic::parse_pipeline_config(load_json_file(config_path));
  if (seed) cfg.scene.seed = *seed;

  std::filesystem::create_directories(out_dir);
  const artic::PipelineResult res = artic::run_pipeline(cfg);

  write_text_file(out_dir + "/result.json", result_row_to_json(res.row).dump(2) + "\n");

  {
    std::ostringstream os;
    for (std::size_t i = 0; i < res.detections.size(); ++i) {
      json dets = json::array();
      for (const auto& d : res.detections[i]) {
        dets.push_back(json{{"center", {d.center.x(), d.center.y(), d.center.z()}},
                            {"delta", artic::twist_to_json(d.delta)},
                            {"support", d.support},
                            {"mean_importance", d.mean_importance}});
      }
      os << json{{"t", static_cast<int>(i)}, {"detections", dets}}.dump() << "\n";
    }
    write_text_file(out_dir + "/detections.jsonl", os.str());
  }
  {
    json trajs = json::array();
    for (const auto& traj : res.trajectories) {
      json centers = json::array(), deltas = json::array();
      for (const auto& c : traj.centers) centers.push_back({c.x(), c.y(), c.z()});
      for (const auto& d : traj.deltas) deltas.push_back(artic::twist_to_json(d));
      trajs.push_back(json{{"centers", centers}, {"deltas", deltas},
                           {"missing_count", traj.missing_count}});
    }
    write_text_file(out_dir + "/trajectories.json",
                    json{{"trajectories", trajs}, {"base", res.base}, {"mover", res.mover}}
                        .dump(2) + "\n");
  }
  if (!res.observations.empty()) {
    artic::ObservationHeader header;
    header.horizon = cfg.scene.T;
    header.extra["camera"] = json{{"width", cfg.image.width},
                                  {"height", cfg.image.height},
                                  {"focal", cfg.image.focal},
                                  {"camera_distance", cfg.image.camera_distance}};
    artic::write_observations_file(out_dir + "/observations.jsonl", res.observations, header);
  }
  if (res.row.ok) {
    write_text_file(out_dir + "/model.json",
                    artic::joint_model_to_json(res.estimated).dump(2) + "\n");
    std::cout << "tangent similarity: " << res.row.similarity << "\n";
    return kExitOk;
  }
  std::cerr << "pipeline failed: " << res.row.error << "\n";
  return kExitData;
}

int cmd_estimate(const std::string& obs_path, double sigma_pos, double sigma_ori,
                 const std::string& constraint, const json& solver_json,
                 std::optional<std::uint64_t> seed, const std::string& out_path,
                 const std::optional<std::string>& truth_path,
                 std::vector<double> grasp_x0, double q_min, double q_max) {
  const auto ingested = artic::ingest_observations(obs_path);
  const artic::Problem problem =
      artic::build_problem(ingested.observations, artic::NoiseSpec{sigma_pos, sigma_ori},
                           artic::joint_type_from_string(constraint));

  artic::SolverConfig solver = artic::parse_solver_config(solver_json);
  if (seed) solver.master_seed = *seed;
  const artic::SolveResult result = artic::solve(problem, solver);
  if (!std::isfinite(result.final_cost)) {
    std::cerr << "estimation failed: no restart produced a finite cost\n";
    return kExitSolverFailure;
  }

  const artic::JointModel model = artic::normalize_joint_model(result.assignment.joint);
  json out{{"model", artic::joint_model_to_json(model)},
           {"final_cost", result.final_cost},
           {"iterations", result.iterations},
           {"restart_index", result.restart_index},
           {"converged", result.converged},
           {"horizon", ingested.horizon},
           {"parts", {problem.part_ids[0], problem.part_ids[1]}}};

  if (truth_path) {
    if (grasp_x0.size() != 3) {
      throw artic::ConfigError("--grasp-x0 needs three comma-separated floats when scoring");
    }
    const artic::Twist nu_true = parse_twist_or_screw(load_json_file(*truth_path), "truth");
    artic::Twist nu_pred = artic::twist_in_camera_frame(result.assignment.joint,
                                                        result.assignment.x[0][0]);
    const auto& q = result.assignment.joint.q_seq;
    if (!q.empty() && q.back() - q.front() < 0.0) nu_pred = -nu_pred;
    artic::GraspSpec g;
    g.x0 = artic::Vector3(grasp_x0[0], grasp_x0[1], grasp_x0[2]);
    g.q_min = q_min;
    g.q_max = q_max;
    const double similarity = artic::tangent_similarity(nu_true, nu_pred, g);
    out["similarity"] = similarity;
    std::cout << "tangent similarity: " << similarity << "\n";
  }

  write_text_file(out_path, out.dump(2) + "\n");
  std::cout << "wrote " << out_path << " (cost " << result.final_cost << ", "
            << result.iterations << " iterations)\n";
  return kExitOk;
}

int cmd_score(const std::string& input_path, const std::optional<std::string>& out_path) {
  const json j = load_json_file(input_path);
  if (!j.contains("true") || !j.contains("pred") || !j.contains("grasp")) {
    throw artic::DataError("score input needs 'true', 'pred' and 'grasp' entries");
  }
  const json& grasp = j.at("grasp");

  double similarity;
  if (grasp.contains("points")) {
    std::vector<artic::Vector3> points;
    for (const auto& p : grasp.at("points")) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 3) throw artic::DataError("grasp point needs 3 floats");
      points.emplace_back(v[0], v[1], v[2]);
    }
    similarity = artic::time_indexed_similarity(parse_twist_sequence(j.at("true"), "true"),
                                                parse_twist_sequence(j.at("pred"), "pred"),
                                                points);
  } else {
    artic::GraspSpec g;
    const auto x0 = grasp.at("x0").get<std::vector<double>>();
    if (x0.size() != 3) throw artic::DataError("grasp x0 needs 3 floats");
    g.x0 = artic::Vector3(x0[0], x0[1], x0[2]);
    g.q_min = grasp.value("q_min", 0.0);
    g.q_max = grasp.at("q_max").get<double>();
    g.n_samples = grasp.value("n_samples", 100);
    similarity = artic::tangent_similarity(parse_twist_or_screw(j.at("true"), "true"),
                                           parse_twist_or_screw(j.at("pred"), "pred"), g);
  }

  std::cout << similarity << "\n";
  if (out_path) {
    write_text_file(*out_path, json{{"similarity", similarity}}.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"articulation model estimation from part-pose observations"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", obs_path, out_path = "model.json";
  std::string constraint = "unconstrained", score_input;
  std::optional<std::string> truth_path_opt, score_out_opt, sweep_config_opt;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> threads_opt;
  double sigma_pos = 1e-3, sigma_ori = 1e-3, q_min = 0.0, q_max = 1.0;
  std::vector<double> grasp_x0;
  json solver_json = json::object();

  auto* sweep = app.add_subcommand("sweep", "run the synthetic-pose experiment grid");
  sweep->add_option("--config", sweep_config_opt, "sweep config JSON (defaults to the full grid)");
  sweep->add_option("--out", out_dir, "output directory")->capture_default_str();
  sweep->add_option("--seed", seed_opt, "override master_seed");
  sweep->add_option("--threads", threads_opt, "worker threads");

  auto* pipeline = app.add_subcommand("pipeline", "motion maps -> clustering -> factor graph");
  pipeline->add_option("--config", config_path, "pipeline config JSON")->required();
  pipeline->add_option("--out", out_dir, "output directory")->capture_default_str();
  pipeline->add_option("--seed", seed_opt, "override scene seed");

  std::string solver_config_path;
  auto* estimate = app.add_subcommand("estimate", "solve from an observation JSONL file");
  estimate->add_option("--obs", obs_path, "observation JSONL file")->required();
  estimate->add_option("--sigma-pos", sigma_pos, "position sigma (m)")->capture_default_str();
  estimate->add_option("--sigma-ori", sigma_ori, "orientation sigma (rad)")->capture_default_str();
  estimate->add_option("--constraint", constraint, "prismatic|revolute|unconstrained")
      ->capture_default_str();
  estimate->add_option("--solver-config", solver_config_path, "solver config JSON");
  estimate->add_option("--seed", seed_opt, "override solver master_seed");
  estimate->add_option("--out", out_path, "output JSON path")->capture_default_str();
  estimate->add_option("--truth", truth_path_opt,
                       "camera-frame true twist JSON ({'twist': [...]} or {'screw': ...})");
  estimate->add_option("--grasp-x0", grasp_x0, "grasp point x,y,z (with --truth)")->delimiter(',');
  estimate->add_option("--q-min", q_min, "grasp range start")->capture_default_str();
  estimate->add_option("--q-max", q_max, "grasp range end")->capture_default_str();

  auto* score = app.add_subcommand("score", "tangent similarity of a prediction");
  score->add_option("--input", score_input, "scoring request JSON")->required();
  score->add_option("--out", score_out_opt, "optional result JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return cmd_sweep(sweep_config_opt, out_dir, seed_opt, threads_opt);
    if (pipeline->parsed()) return cmd_pipeline(config_path, out_dir, seed_opt);
    if (estimate->parsed()) {
      if (!solver_config_path.empty()) solver_json = load_json_file(solver_config_path);
      return cmd_estimate(obs_path, sigma_pos, sigma_ori, constraint, solver_json, seed_opt,
                          out_path, truth_path_opt, grasp_x0, q_min, q_max);
    }
    if (score->parsed()) return cmd_score(score_input, score_out_opt);
  } catch (const artic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const artic::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

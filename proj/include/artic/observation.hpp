#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "artic/errors.hpp"
#include "artic/joint.hpp"
#include "artic/lie.hpp"

namespace artic {

enum class ObsKind { FullPose, Center, Delta };

inline std::string to_string(ObsKind k) {
  switch (k) {
    case ObsKind::FullPose: return "pose";
    case ObsKind::Center: return "center";
    default: return "delta";
  }
}

// One observation of one part at one timestep. Delta observations are
// world/camera-frame left deltas from t to t+1: Exp(delta) x^(t) = x^(t+1).
struct Observation {
  int part = 0;
  int t = 0;
  ObsKind kind = ObsKind::FullPose;
  Pose pose;       // FullPose payload
  Vector3 center = Vector3::Zero();
  Twist delta;
};

// Per-factor diagonal covariance scales: position sigma in meters, orientation
// sigma in radians. Strictly positive.
struct NoiseSpec {
  double sigma_pos = 1e-3;
  double sigma_ori = 1e-3;
};

// Optional first record of an observation file: declared horizon and, for
// synthetic scenes, the camera intrinsics used to build motion maps.
struct ObservationHeader {
  std::optional<int> horizon;
  nlohmann::json extra;  // camera, scene metadata; passed through verbatim
};

// --- JSON Lines -------------------------------------------------------------
// One record per line:
//   {"part": int, "t": int, "kind": "pose"|"center"|"delta", "data": [floats]}
// pose: 12 floats (row-major rotation, then translation); center: 3; delta: 6 (v, w).
// A leading {"kind": "header", ...} record is permitted and skipped by ingestion.

inline nlohmann::json observation_to_json(const Observation& o) {
  std::vector<double> data;
  switch (o.kind) {
    case ObsKind::FullPose:
      data.reserve(12);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) data.push_back(o.pose.rotation(r, c));
      for (int i = 0; i < 3; ++i) data.push_back(o.pose.translation[i]);
      break;
    case ObsKind::Center:
      data = {o.center.x(), o.center.y(), o.center.z()};
      break;
    case ObsKind::Delta:
      data = {o.delta.v.x(), o.delta.v.y(), o.delta.v.z(),
              o.delta.w.x(), o.delta.w.y(), o.delta.w.z()};
      break;
  }
  return nlohmann::json{{"part", o.part}, {"t", o.t}, {"kind", to_string(o.kind)}, {"data", data}};
}

inline Observation observation_from_json(const nlohmann::json& j, int line_no) {
  const auto fail = [line_no](const std::string& msg) -> DataError {
    return DataError("observation line " + std::to_string(line_no) + ": " + msg);
  };
  Observation o;
  try {
    o.part = j.at("part").get<int>();
    o.t = j.at("t").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (kind == "pose") {
      if (data.size() != 12) throw fail("pose record needs 12 floats");
      o.kind = ObsKind::FullPose;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) o.pose.rotation(r, c) = data[3 * r + c];
      o.pose.translation = Vector3(data[9], data[10], data[11]);
    } else if (kind == "center") {
      if (data.size() != 3) throw fail("center record needs 3 floats");
      o.kind = ObsKind::Center;
      o.center = Vector3(data[0], data[1], data[2]);
    } else if (kind == "delta") {
      if (data.size() != 6) throw fail("delta record needs 6 floats");
      o.kind = ObsKind::Delta;
      o.delta = Twist(data[0], data[1], data[2], data[3], data[4], data[5]);
    } else {
      throw fail("unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (o.t < 0) throw fail("negative timestep");
  return o;
}

inline void write_observations(std::ostream& os, const std::vector<Observation>& obs,
                               const std::optional<ObservationHeader>& header = std::nullopt) {
  if (header) {
    nlohmann::json h = header->extra;
    h["kind"] = "header";
    if (header->horizon) h["T"] = *header->horizon;
    os << h.dump() << "\n";
  }
  for (const auto& o : obs) os << observation_to_json(o).dump() << "\n";
}

inline void write_observations_file(const std::string& path, const std::vector<Observation>& obs,
                                    const std::optional<ObservationHeader>& header = std::nullopt) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_observations(os, obs, header);
}

struct ObservationFile {
  std::vector<Observation> observations;
  std::optional<ObservationHeader> header;
};

inline ObservationFile read_observations(std::istream& is) {
  ObservationFile out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("observation line " + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (j.contains("kind") && j["kind"] == "header") {
      ObservationHeader h;
      if (j.contains("T")) h.horizon = j["T"].get<int>();
      h.extra = j;
      out.header = h;
      continue;
    }
    out.observations.push_back(observation_from_json(j, line_no));
  }
  return out;
}

inline ObservationFile read_observations_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open observation file '" + path + "'");
  return read_observations(is);
}

}  // namespace artic

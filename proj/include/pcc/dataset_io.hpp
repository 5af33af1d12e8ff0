#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pcc/errors.hpp"
#include "pcc/scenes.hpp"

// Line-delimited JSON dataset files. One record per detection:
//   {"scene":0,"timestep":3,"camera":1,"detection_id":0,
//    "identity":12,"feature":[...]}
// "identity" is optional; files without it can be matched but not
// scored. The same format carries externally extracted features.

namespace pcc {

inline void write_dataset_jsonl(const Dataset& ds, const std::string& path,
                                bool include_labels = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& scene : ds.scenes)
    for (const auto& frame : scene.frames)
      for (const auto& view : frame.views)
        for (int r = 0; r < view.count(); ++r) {
          nlohmann::json rec;
          rec["scene"] = frame.scene_id;
          rec["timestep"] = frame.timestep;
          rec["camera"] = view.camera;
          rec["detection_id"] = view.detection_ids[static_cast<std::size_t>(r)];
          if (include_labels)
            rec["identity"] = view.identities[static_cast<std::size_t>(r)];
          nlohmann::json feature = nlohmann::json::array();
          for (int c = 0; c < view.features.cols(); ++c)
            feature.push_back(view.features(r, c));
          rec["feature"] = std::move(feature);
          out << rec.dump() << '\n';
        }
  if (!out) throw DataError("write failed: " + path);
}

inline Dataset read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path);

  struct Row {
    int detection_id;
    int identity;
    std::vector<double> feature;
  };
  // (scene, timestep, camera) -> rows; ordered keys give deterministic
  // reconstruction regardless of record order in the file.
  std::map<std::tuple<int, int, int>, std::vector<Row>> groups;

  std::string line;
  long line_no = 0;
  int obs_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad JSON: " + e.what());
    }
    try {
      Row row;
      const int scene = rec.at("scene").get<int>();
      const int timestep = rec.at("timestep").get<int>();
      const int camera = rec.at("camera").get<int>();
      row.detection_id = rec.at("detection_id").get<int>();
      row.identity = rec.contains("identity") ? rec["identity"].get<int>() : -1;
      row.feature = rec.at("feature").get<std::vector<double>>();
      if (scene < 0 || timestep < 0 || camera < 0)
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": negative scene/timestep/camera");
      if (row.feature.empty())
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": empty feature vector");
      if (obs_dim < 0) obs_dim = static_cast<int>(row.feature.size());
      if (static_cast<int>(row.feature.size()) != obs_dim)
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": feature length differs from earlier records");
      for (double x : row.feature)
        if (!std::isfinite(x))
          throw DataError(path + ":" + std::to_string(line_no) +
                          ": non-finite feature entry");
      groups[{scene, timestep, camera}].push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": missing or mistyped field: " + e.what());
    }
  }
  if (groups.empty()) throw DataError("empty dataset: " + path);

  Dataset ds;
  int max_camera = -1;
  int max_identity = -1;
  for (const auto& [key, rows] : groups) {
    const auto [scene_id, timestep, camera] = key;
    if (ds.scenes.empty() || ds.scenes.back().scene_id != scene_id) {
      SceneDataset scene;
      scene.scene_id = scene_id;
      scene.config.obs_dim = obs_dim;
      ds.scenes.push_back(std::move(scene));
    }
    SceneDataset& scene = ds.scenes.back();
    if (scene.frames.empty() || scene.frames.back().timestep != timestep) {
      SceneFrame frame;
      frame.scene_id = scene_id;
      frame.timestep = timestep;
      scene.frames.push_back(std::move(frame));
    }
    SceneFrame& frame = scene.frames.back();

    std::vector<Row> ordered = rows;
    std::sort(ordered.begin(), ordered.end(),
              [](const Row& a, const Row& b) {
                return a.detection_id < b.detection_id;
              });
    for (std::size_t r = 1; r < ordered.size(); ++r)
      if (ordered[r].detection_id == ordered[r - 1].detection_id)
        throw DataError(path + ": duplicate detection_id " +
                        std::to_string(ordered[r].detection_id) +
                        " in scene " + std::to_string(scene_id) +
                        " timestep " + std::to_string(timestep) + " camera " +
                        std::to_string(camera));

    ViewObservations view;
    view.camera = camera;
    view.features = Matrix(static_cast<int>(ordered.size()), obs_dim);
    for (int r = 0; r < static_cast<int>(ordered.size()); ++r) {
      const Row& row = ordered[static_cast<std::size_t>(r)];
      for (int c = 0; c < obs_dim; ++c)
        view.features(r, c) = row.feature[static_cast<std::size_t>(c)];
      view.detection_ids.push_back(row.detection_id);
      view.identities.push_back(row.identity);
      max_identity = std::max(max_identity, row.identity);
    }
    max_camera = std::max(max_camera, camera);
    frame.views.push_back(std::move(view));
  }

  for (auto& scene : ds.scenes) {
    scene.config.n_cameras = max_camera + 1;
    scene.config.n_timesteps = static_cast<int>(scene.frames.size());
    scene.config.n_identities = max_identity + 1;
  }
  return ds;
}

}  // namespace pcc

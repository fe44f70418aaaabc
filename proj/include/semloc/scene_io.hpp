#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloc/place_grid.hpp"
#include "semloc/scene_graph.hpp"

namespace semloc {

// One observation: where it was taken, what the segmentation produced, and
// the place-class label.
struct SceneRecord {
  Pose pose;
  std::vector<SemanticRegion> regions;
  int class_id = 0;
};

inline nlohmann::json scene_record_to_json(const SceneRecord& rec) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : rec.regions) {
    regions.push_back({{"label", r.label},
                       {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}}});
  }
  return {{"pose", {rec.pose.x, rec.pose.y, rec.pose.theta}},
          {"regions", regions},
          {"class_id", rec.class_id}};
}

inline void write_scene_records(std::ostream& os,
                                const std::vector<SceneRecord>& records) {
  for (const auto& rec : records) {
    os << scene_record_to_json(rec).dump() << '\n';
  }
}

inline void write_scene_records(const std::string& path,
                                const std::vector<SceneRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_scene_records(os, records);
  if (!os) throw std::runtime_error("write failed: " + path);
}

namespace detail {

[[noreturn]] inline void record_error(std::size_t line, const std::string& why) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + why);
}

inline SceneRecord parse_scene_record(const std::string& text,
                                      std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    record_error(line, std::string("invalid record: ") + e.what());
  }
  if (!j.is_object()) record_error(line, "record is not an object");
  if (!j.contains("pose") || !j["pose"].is_array() || j["pose"].size() != 3) {
    record_error(line, "missing or malformed 'pose' (expect [x, y, theta])");
  }
  if (!j.contains("regions") || !j["regions"].is_array()) {
    record_error(line, "missing or malformed 'regions'");
  }
  if (!j.contains("class_id") || !j["class_id"].is_number_integer()) {
    record_error(line, "missing or malformed 'class_id'");
  }
  SceneRecord rec;
  for (int i = 0; i < 3; ++i) {
    if (!j["pose"][i].is_number()) record_error(line, "'pose' must be numeric");
  }
  rec.pose = {j["pose"][0].get<double>(), j["pose"][1].get<double>(),
              j["pose"][2].get<double>()};
  rec.class_id = j["class_id"].get<int>();
  if (rec.class_id < 0) record_error(line, "'class_id' must be non-negative");
  for (const auto& rj : j["regions"]) {
    if (!rj.is_object() || !rj.contains("label") ||
        !rj["label"].is_number_integer() || !rj.contains("bbox") ||
        !rj["bbox"].is_array() || rj["bbox"].size() != 4) {
      record_error(line, "malformed region (expect {label, bbox:[4]})");
    }
    SemanticRegion r;
    r.label = rj["label"].get<int>();
    for (int i = 0; i < 4; ++i) {
      if (!rj["bbox"][i].is_number()) {
        record_error(line, "region bbox must be numeric");
      }
    }
    r.bbox = {rj["bbox"][0].get<int>(), rj["bbox"][1].get<int>(),
              rj["bbox"][2].get<int>(), rj["bbox"][3].get<int>()};
    try {
      validate_region(r);
    } catch (const std::exception& e) {
      record_error(line, e.what());
    }
    rec.regions.push_back(r);
  }
  return rec;
}

}  // namespace detail

// Reads line-delimited scene records; malformed lines abort with their line
// number. Blank lines are not allowed except a trailing newline.
inline std::vector<SceneRecord> read_scene_records(std::istream& is) {
  std::vector<SceneRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (text.empty()) {
      if (is.peek() == std::char_traits<char>::eof()) break;
      detail::record_error(line, "blank line");
    }
    out.push_back(detail::parse_scene_record(text, line));
  }
  return out;
}

inline std::vector<SceneRecord> read_scene_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_scene_records(is);
}

}  // namespace semloc

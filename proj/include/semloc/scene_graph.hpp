#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semloc/geometry.hpp"

namespace semloc {

// Fixed observation geometry: semantic regions live in a 512x512 image.
constexpr int kImageSize = 512;
constexpr int kNumMetaClasses = 10;
constexpr int kNumSizeWords = 3;
constexpr int kNumLocationWords = 9;
constexpr int kNodeFeatureDim =
    kNumMetaClasses * kNumSizeWords * kNumLocationWords;  // 270

// Region area below this many pixels is treated as a dummy detection.
constexpr long long kMinRegionArea = 5000;
// Size-word threshold: 1/16 of the image area.
constexpr long long kSizeWordUnit =
    static_cast<long long>(kImageSize) * kImageSize / 16;  // 16384
// Boxes closer than this many pixels get connected by an edge.
constexpr double kEdgeDistanceLimit = 20.0;

inline const std::array<std::string, kNumMetaClasses>& meta_class_names() {
  static const std::array<std::string, kNumMetaClasses> names = {
      "wall", "floor",  "ceiling",      "bed", "door",
      "table", "sofa",  "refrigerator", "TV",  "Other"};
  return names;
}

// One detected part region: a coarse semantic label and its bounding box.
struct SemanticRegion {
  int label = 0;
  PixelBox bbox;
};

inline void validate_region(const SemanticRegion& r) {
  if (r.label < 0 || r.label >= kNumMetaClasses) {
    throw std::invalid_argument("region label out of range: " +
                                std::to_string(r.label));
  }
  if (r.bbox.x0 > r.bbox.x1 || r.bbox.y0 > r.bbox.y1 || r.bbox.x0 < 0 ||
      r.bbox.y0 < 0 || r.bbox.x1 > kImageSize || r.bbox.y1 > kImageSize) {
    throw std::invalid_argument("region bbox outside the 512x512 image");
  }
}

// Node features are one-hot indices over the joint (meta, size, location)
// vocabulary, packed as meta*27 + size*9 + location.
inline int pack_node_feature(int meta, int size, int location) {
  return meta * (kNumSizeWords * kNumLocationWords) + size * kNumLocationWords +
         location;
}

struct NodeWords {
  int meta = 0;
  int size = 0;
  int location = 0;
};

inline NodeWords unpack_node_feature(int index) {
  NodeWords w;
  w.meta = index / (kNumSizeWords * kNumLocationWords);
  w.size = (index / kNumLocationWords) % kNumSizeWords;
  w.location = index % kNumLocationWords;
  return w;
}

// Attributed scene graph. Nodes hold one-hot feature indices, edges are
// unordered index pairs stored with first < second.
struct SceneGraph {
  std::vector<int> nodes;
  std::vector<std::pair<int, int>> edges;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

// Drops regions smaller than the dummy-object threshold. Order preserved;
// area exactly at the threshold is kept.
inline std::vector<SemanticRegion> filter_regions(
    const std::vector<SemanticRegion>& regions) {
  std::vector<SemanticRegion> kept;
  kept.reserve(regions.size());
  for (const auto& r : regions) {
    if (r.bbox.area() >= kMinRegionArea) kept.push_back(r);
  }
  return kept;
}

// Size word: small (0) below S_o, medium (1) in [S_o, 6*S_o), large (2) above.
inline int size_word(const PixelBox& bbox) {
  long long area = bbox.area();
  if (area < kSizeWordUnit) return 0;
  if (area < 6 * kSizeWordUnit) return 1;
  return 2;
}

// Location word: bbox center mapped onto a 3x3 grid, row-major from the
// top-left. Centers on the far image edge fall into the last cell.
inline int location_word(const PixelBox& bbox) {
  auto cell = [](double coord) {
    int c = static_cast<int>(std::floor(coord * 3.0 / kImageSize));
    return std::clamp(c, 0, 2);
  };
  return cell(bbox.center_y()) * 3 + cell(bbox.center_x());
}

// Connects region pairs whose boxes overlap (touching counts) or lie within
// 20 pixels of each other.
inline std::vector<std::pair<int, int>> connect_edges(
    const std::vector<SemanticRegion>& regions) {
  std::vector<std::pair<int, int>> edges;
  const int n = static_cast<int>(regions.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (box_distance(regions[i].bbox, regions[j].bbox) <=
          kEdgeDistanceLimit) {
        edges.emplace_back(i, j);
      }
    }
  }
  return edges;
}

// Full two-step construction: filter dummy regions, attach discrete node
// words, connect proximity edges. Node order follows the filtered input.
inline SceneGraph build_graph(const std::vector<SemanticRegion>& regions) {
  for (const auto& r : regions) validate_region(r);
  std::vector<SemanticRegion> kept = filter_regions(regions);
  SceneGraph g;
  g.nodes.reserve(kept.size());
  for (const auto& r : kept) {
    g.nodes.push_back(
        pack_node_feature(r.label, size_word(r.bbox), location_word(r.bbox)));
  }
  g.edges = connect_edges(kept);
  return g;
}

}  // namespace semloc

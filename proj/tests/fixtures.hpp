#pragma once

#include <random>
#include <string>
#include <vector>

#include "layoutprior/annotations.hpp"
#include "layoutprior/grammar.hpp"
#include "layoutprior/scene.hpp"

namespace fixtures {

using namespace layoutprior;

inline const std::vector<std::string>& category_pool() {
  static const std::vector<std::string> pool{"person", "dining table", "teddy bear", "kite", "motorcycle", "A", "B"};
  return pool;
}

inline int coord(std::mt19937_64& rng) { return static_cast<int>(rng() % (kCanvasSize + 1)); }

inline Box random_box(std::mt19937_64& rng) {
  int x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  if (x0 == x1) x1 = std::min(x0 + 1, kCanvasSize), x0 = x1 - 1;
  if (y0 == y1) y1 = std::min(y0 + 1, kCanvasSize), y0 = y1 - 1;
  return {x0, y0, x1, y1};
}

/// Valid record of the given type; size flag consistent with its instances.
inline SceneRecord random_scene(std::mt19937_64& rng, AnnotationType type, int max_instances = 6,
                                int mask_points = kDefaultMaskPoints) {
  SceneRecord rec;
  rec.annotation_type = type;
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_instances));
  rec.data_type = n == 1 && rng() % 2 ? DataType::ObjectCentric : DataType::MultipleInstances;
  rec.n_keypoints = type == AnnotationType::Keypoint ? (rng() % 2 ? 18 : 14) : 0;
  const auto& pool = category_pool();
  for (int i = 0; i < n; ++i) {
    Instance inst;
    inst.category = pool[rng() % pool.size()];
    if (type == AnnotationType::Box) {
      inst.geometry = random_box(rng);
    } else if (type == AnnotationType::Keypoint) {
      Keypoints k;
      for (int j = 0; j < rec.n_keypoints; ++j) {
        k.joints.push_back(rng() % 4 == 0 ? Point{0, 0} : Point{coord(rng), coord(rng)});
      }
      inst.geometry = k;
    } else {
      MaskContour m;
      for (int j = 0; j < mask_points; ++j) m.points.push_back({coord(rng), coord(rng)});
      inst.geometry = m;
    }
    rec.instances.push_back(std::move(inst));
  }
  rec.size_flag = classify_size(rec.instances);
  return rec;
}

inline AnnotationType random_type(std::mt19937_64& rng) { return static_cast<AnnotationType>(rng() % 3); }

}  // namespace fixtures

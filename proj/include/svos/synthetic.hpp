#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "svos/dataset.hpp"
#include "svos/image.hpp"
#include "svos/rng.hpp"

namespace svos {
namespace data {

enum class ShapeKind : int { Ellipse = 0, Rectangle = 1, Polygon = 2 };

// One moving textured shape. Pose/motion fields left as NaN are sampled from
// the seed; tests pin them explicitly to keep trajectories analytic.
struct ObjectSpec {
  ShapeKind shape = ShapeKind::Ellipse;
  double rx = std::nan("");  // half extents in pixels
  double ry = std::nan("");
  int polygon_sides = 5;
  uint64_t texture_seed = 0;
  double x0 = std::nan("");
  double y0 = std::nan("");
  double angle0 = 0.0;
  double vx = std::nan("");
  double vy = std::nan("");
  double omega = 0.0;  // radians per frame
};

struct SceneSpec {
  int height = 64;
  int width = 64;
  int num_objects = 2;
  int frames = 24;
  uint64_t background_seed = 0;
  bool allow_occlusion = true;
  double max_speed = 1.6;
  std::vector<ObjectSpec> objects;  // resized to num_objects when shorter

  void validate() const;
  std::string to_text() const;
  static SceneSpec from_text(const std::string& text);
};

// Fully resolved trajectories (all NaNs filled), deterministic in (spec, seed).
struct ObjectState {
  ShapeKind shape;
  double rx, ry;
  int polygon_sides;
  uint64_t texture_seed;
  double x0, y0, angle0, vx, vy, omega;

  // wall-bounced center at frame t; bounds come from the canvas and extents
  double cx(int t, int width) const;
  double cy(int t, int height) const;
  double angle(int t) const { return angle0 + omega * t; }
};

struct SceneState {
  SceneSpec spec;
  std::vector<ObjectState> objects;
};

SceneState resolve_scene(const SceneSpec& spec, uint64_t seed);

// Frames quantized to the 1/255 grid; gt labels present; object k has id k+1.
VideoSequence generate_synthetic_video(const SceneSpec& spec, uint64_t seed,
                                       const std::string& id = "synthetic");
VideoSequence generate_from_state(const SceneState& state, const std::string& id);

// Object k rasterized alone (no occlusion) at frame t.
LabelMap rasterize_object_solo(const SceneState& state, int t, int k);

}  // namespace data
}  // namespace svos

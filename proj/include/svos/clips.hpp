#pragma once

#include <vector>

#include "svos/dataset.hpp"
#include "svos/rng.hpp"
#include "svos/transforms.hpp"

namespace svos {
namespace data {

// One training example: N reference frame/mask pairs plus a query, an
// adjacent frame pair for the short-term loss, and a distant pair for the
// long-term loss. All frames come from one video, indices ascending.
struct Clip {
  struct FrameMask {
    Image frame;
    LabelMap mask;  // empty when the clip carries no masks
    int index = 0;
  };

  std::vector<FrameMask> references;
  FrameMask query;
  Image aux_a, aux_b;          // frames t, t+1
  int aux_t = 0;
  Image distant_a, distant_b;  // frames t, t' with |t - t'| >= 5 when possible
  int distant_t = 0, distant_t2 = 0;
  int object_count = 0;
  bool has_masks = false;
};

// masks may be null: stage-1 clips carry frames only.
Clip sample_training_clip(const VideoSequence& video, const MaskSource* masks, int n_frames,
                          int n_refs, Rng& rng);

struct AugmentConfig {
  double scale_min = 0.8;
  double scale_max = 1.25;
  double crop_area_min = 0.75;
  double flip_prob = 0.5;
  int out_h = 64;
  int out_w = 64;
};

corr::TransformParams sample_augment_params(const AugmentConfig& cfg, int h, int w, Rng& rng);

// Applies one geometric transform to every frame and mask of the clip.
Clip augment(const Clip& clip, const corr::TransformParams& params);

}  // namespace data
}  // namespace svos

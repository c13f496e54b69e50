#pragma once

#include <vector>

#include "svos/image.hpp"

namespace svos {
namespace eval {

// Jaccard overlap of one object's binary masks; empty-vs-empty counts as 1.
double region_similarity(const LabelMap& pred, const LabelMap& gt, int object_id);

// Boundary F-measure: precision/recall of boundary pixels matched within
// tolerance_px, F = 2PR/(P+R); both boundaries empty -> 1.
double contour_accuracy(const LabelMap& pred, const LabelMap& gt, int object_id,
                        int tolerance_px);

// 0.8% of the image diagonal, rounded up
int default_boundary_tolerance(int h, int w);

// Boundary pixels of the object's binary mask (4-neighborhood label change
// strictly inside the frame). Exposed for the evaluation internals.
std::vector<int> boundary_pixels(const LabelMap& labels, int object_id);

// Mean IoU of pseudo labels against gt objects under the best injective
// assignment of pseudo ids to gt ids, pooled over all frames of a video.
double best_match_iou(const std::vector<LabelMap>& pseudo, const std::vector<LabelMap>& gt);

}  // namespace eval
}  // namespace svos

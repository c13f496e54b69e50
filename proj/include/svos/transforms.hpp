#pragma once

#include <string>
#include <vector>

#include "svos/image.hpp"
#include "svos/networks.hpp"
#include "svos/rng.hpp"
#include "svos/tensor.hpp"

namespace svos {
namespace corr {

// Geometric transform, applied scale -> crop -> flip. Loss paths only ever
// use flip and integer-cell crops so features transform by pure index remaps;
// scaling exists for data augmentation, where output is resampled to a fixed
// training size.
struct TransformParams {
  enum class Kind { Identity, FlipH, Crop, Scale, Composite };

  bool flip = false;
  bool has_crop = false;
  int crop_y0 = 0, crop_x0 = 0, crop_h = 0, crop_w = 0;
  double scale = 1.0;
  int out_h = 0, out_w = 0;  // augmentation output size; 0 keeps the crop size

  Kind kind() const {
    int parts = (flip ? 1 : 0) + (has_crop ? 1 : 0) + (scale != 1.0 ? 1 : 0);
    if (parts == 0) return Kind::Identity;
    if (parts > 1) return Kind::Composite;
    if (flip) return Kind::FlipH;
    if (has_crop) return Kind::Crop;
    return Kind::Scale;
  }

  bool index_exact() const { return scale == 1.0 && out_h == 0 && out_w == 0; }

  static TransformParams identity() { return {}; }
  static TransformParams flip_h() {
    TransformParams t;
    t.flip = true;
    return t;
  }
  static TransformParams crop(int y0, int x0, int h, int w) {
    TransformParams t;
    t.has_crop = true;
    t.crop_y0 = y0;
    t.crop_x0 = x0;
    t.crop_h = h;
    t.crop_w = w;
    return t;
  }

  // Rescale integer crop parameters between image and feature resolution.
  TransformParams at_scale(int mul, int div) const;
};

// Output-cell -> input-cell index map for flip/crop transforms on an (h, w)
// grid. Throws on scaling transforms or out-of-bounds crops.
std::vector<int> index_map(const TransformParams& phi, int h, int w, int* oh, int* ow);

// Pure index remap on a channels-first grid (image or feature data).
Tensor<float> apply_transform(const TransformParams& phi, const Tensor<float>& chw);
net::FeatureMap apply_transform(const TransformParams& phi, const net::FeatureMap& fm);
LabelMap apply_transform_labels(const TransformParams& phi, const LabelMap& labels);

// Resampling warp used by augmentation: scale -> crop -> resize to
// (out_h, out_w) -> flip. Frames interpolate bilinearly, labels by nearest
// neighbor. Falls back to the exact index path when no resampling happens.
Image warp_image(const TransformParams& phi, const Image& img);
LabelMap warp_labels(const TransformParams& phi, const LabelMap& labels);

}  // namespace corr
}  // namespace svos

#pragma once

#include "svos/error.hpp"
#include "svos/image.hpp"
#include "svos/tensor.hpp"

namespace svos {

// Per-pixel probability distribution over {background, object 1..K};
// channel 0 is background. Stride tags whether the grid lives at image or
// feature resolution.
struct MaskSet {
  Tensor<float> p;  // (K+1, H, W)
  int stride = 1;

  int objects() const { return p.dim(0) - 1; }
  int h() const { return p.dim(1); }
  int w() const { return p.dim(2); }

  void validate(float tol = 1e-5f) const {
    if (p.rank() != 3 || p.dim(0) < 1) throw validation_error("mask set: want (K+1,H,W)");
    const int hw = p.dim(1) * p.dim(2);
    for (int i = 0; i < hw; ++i) {
      float s = 0;
      for (int c = 0; c < p.dim(0); ++c) {
        float v = p[c * hw + i];
        if (v < -tol || v > 1 + tol) throw validation_error("mask set: value outside [0,1]");
        s += v;
      }
      if (std::abs(s - 1.0f) > tol)
        throw validation_error("mask set: channel sum " + std::to_string(s) + " != 1");
    }
  }
};

inline MaskSet one_hot_masks(const LabelMap& labels, int num_objects, int stride = 1) {
  MaskSet m;
  m.stride = stride;
  m.p = Tensor<float>({num_objects + 1, labels.dim(0), labels.dim(1)});
  const int hw = labels.dim(0) * labels.dim(1);
  for (int i = 0; i < hw; ++i) {
    int id = labels[i] <= num_objects ? labels[i] : 0;
    m.p[id * hw + i] = 1.0f;
  }
  return m;
}

inline LabelMap argmax_labels(const MaskSet& m) {
  LabelMap out({m.h(), m.w()});
  const int hw = m.h() * m.w();
  for (int i = 0; i < hw; ++i) {
    int best = 0;
    float bv = m.p[i];
    for (int c = 1; c < m.p.dim(0); ++c)
      if (m.p[c * hw + i] > bv) {
        bv = m.p[c * hw + i];
        best = c;
      }
    out[i] = static_cast<uint8_t>(best);
  }
  return out;
}

}  // namespace svos

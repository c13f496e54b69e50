#pragma once

#include <vector>

#include "svos/maskset.hpp"
#include "svos/networks.hpp"

namespace svos {
namespace corr {

// Reference-pixels x query-pixels matching weights. Normalized over the
// reference axis, so every column is a convex weighting of reference pixels
// and warped masks stay valid distributions.
struct AffinityMatrix {
  Tensor<float> w;  // (N*H*W, H*W)
  float temperature = 0.07f;

  int ref_pixels() const { return w.dim(0); }
  int query_pixels() const { return w.dim(1); }
};

inline constexpr float kDefaultTemperature = 0.07f;

// entry(r, q) ~ exp(<f_r, f_q> / temperature), columns sum to 1
AffinityMatrix affinity(const std::vector<const net::FeatureMap*>& refs,
                        const net::FeatureMap& query, float temperature);
AffinityMatrix affinity(const net::FeatureMap& ref, const net::FeatureMap& query,
                        float temperature);

// (P, C) matrix of per-pixel reference vectors, stacked in reference order
Tensor<float> stack_feature_rows(const std::vector<const net::FeatureMap*>& maps);

// V_q = A^T V_r
Tensor<float> readout(const AffinityMatrix& a, const Tensor<float>& ref_rows);
net::FeatureMap readout(const AffinityMatrix& a, const std::vector<const net::FeatureMap*>& refs);

// Y_q = A^T [Y_r1 ... Y_rN], channel-wise over {bg, objects}
MaskSet warp_mask(const AffinityMatrix& a, const std::vector<const MaskSet*>& ref_masks);

// losses returning value plus input gradients (computed at double precision)
struct LossResult {
  double value = 0;
  Tensor<float> grad_a;  // w.r.t. the first feature argument
  Tensor<float> grad_b;  // w.r.t. the second
};

// Contrastive alignment of E(phi(I_t)) with phi(E(I_{t+1})): each pixel of
// the second argument must match its aligned pixel in the first.
LossResult loss_short(const net::FeatureMap& feat_transformed_t,
                      const net::FeatureMap& feat_t1_transformed, float temperature);

// argmax matches of E(phi(I_t')) pixels into E(I_t) pixels; ties take the
// lowest index, no gradient flows through the result
std::vector<int> pseudo_match(const net::FeatureMap& feat_transformed_distant,
                              const net::FeatureMap& feat_t, float temperature);

// cross-entropy of phi(E(I_t')) pixels against their pseudo-matched targets
LossResult loss_long(const net::FeatureMap& feat_distant_transformed,
                     const net::FeatureMap& feat_t, const std::vector<int>& match,
                     float temperature);

}  // namespace corr
}  // namespace svos

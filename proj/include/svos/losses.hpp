#pragma once

#include <vector>

#include "svos/autodiff.hpp"

namespace svos {
namespace corr {

// Tape-level loss kernels shared by training and the plain wrappers.
// Inputs are (HW, D) row matrices of per-pixel features.

// Short-term consistency: pixel k of `xb` (= phi(E(I_t+1))) is contrasted
// against all pixels of `xa` (= E(phi(I_t))) with its aligned pixel positive.
template <typename T>
int loss_short_t(Tape<T>& tp, int xa, int xb, T temperature) {
  const Tensor<T>& a = tp.val(xa);
  const Tensor<T>& b = tp.val(xb);
  if (a.shape != b.shape)
    throw validation_error("loss_short: feature shapes differ: " + shape_str(a.shape) + " vs " +
                           shape_str(b.shape));
  if (temperature <= T(0)) throw validation_error("loss_short: temperature must be positive");
  int sims = ad::matmul_nt(tp, xb, xa);
  sims = ad::scale(tp, sims, T(1) / temperature);
  std::vector<int> aligned(static_cast<size_t>(a.dim(0)));
  for (int i = 0; i < a.dim(0); ++i) aligned[static_cast<size_t>(i)] = i;
  return ad::cross_entropy_rows(tp, sims, aligned);
}

// Long-term dependency: pixel k of `xdt` (= phi(E(I_t'))) is classified over
// the pixels of `xt` (= E(I_t)) against its pseudo-matched index.
template <typename T>
int loss_long_t(Tape<T>& tp, int xdt, int xt, const std::vector<int>& match, T temperature) {
  const Tensor<T>& a = tp.val(xdt);
  const Tensor<T>& b = tp.val(xt);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw validation_error("loss_long: feature shapes differ: " + shape_str(a.shape) + " vs " +
                           shape_str(b.shape));
  if (temperature <= T(0)) throw validation_error("loss_long: temperature must be positive");
  if (static_cast<int>(match.size()) != a.dim(0))
    throw validation_error("loss_long: match count != pixel count");
  int sims = ad::matmul_nt(tp, xdt, xt);
  sims = ad::scale(tp, sims, T(1) / temperature);
  return ad::cross_entropy_rows(tp, sims, match);
}

}  // namespace corr
}  // namespace svos

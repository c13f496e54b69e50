#include "svos/transforms.hpp"

#include <cmath>

#include "svos/error.hpp"

namespace svos {
namespace corr {

TransformParams TransformParams::at_scale(int mul, int div) const {
  if (!index_exact()) throw validation_error("transform: cannot rescale a resampling transform");
  TransformParams t = *this;
  if (has_crop) {
    for (int v : {crop_y0, crop_x0, crop_h, crop_w})
      if ((v * mul) % div != 0)
        throw validation_error("transform: crop parameter " + std::to_string(v) +
                               " not integral at stride " + std::to_string(div) + "/" +
                               std::to_string(mul));
    t.crop_y0 = crop_y0 * mul / div;
    t.crop_x0 = crop_x0 * mul / div;
    t.crop_h = crop_h * mul / div;
    t.crop_w = crop_w * mul / div;
  }
  return t;
}

std::vector<int> index_map(const TransformParams& phi, int h, int w, int* oh, int* ow) {
  if (!phi.index_exact())
    throw validation_error("transform: scaling is not an index remap");
  int y0 = 0, x0 = 0, ch = h, cw = w;
  if (phi.has_crop) {
    y0 = phi.crop_y0;
    x0 = phi.crop_x0;
    ch = phi.crop_h;
    cw = phi.crop_w;
    if (y0 < 0 || x0 < 0 || ch < 1 || cw < 1 || y0 + ch > h || x0 + cw > w)
      throw validation_error("transform: crop window " + std::to_string(y0) + "," +
                             std::to_string(x0) + " " + std::to_string(ch) + "x" +
                             std::to_string(cw) + " outside " + std::to_string(h) + "x" +
                             std::to_string(w) + " input");
  }
  std::vector<int> map(static_cast<size_t>(ch) * cw);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x) {
      int sx = phi.flip ? (cw - 1 - x) : x;
      map[static_cast<size_t>(y) * cw + x] = (y0 + y) * w + (x0 + sx);
    }
  *oh = ch;
  *ow = cw;
  return map;
}

Tensor<float> apply_transform(const TransformParams& phi, const Tensor<float>& chw) {
  if (chw.rank() != 3) throw validation_error("apply_transform: want (C,H,W)");
  int oh = 0, ow = 0;
  auto map = index_map(phi, chw.dim(1), chw.dim(2), &oh, &ow);
  const int c = chw.dim(0), hw = chw.dim(1) * chw.dim(2), ohw = oh * ow;
  Tensor<float> out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int o = 0; o < ohw; ++o) out[ch * ohw + o] = chw[ch * hw + map[static_cast<size_t>(o)]];
  return out;
}

net::FeatureMap apply_transform(const TransformParams& phi, const net::FeatureMap& fm) {
  return {apply_transform(phi, fm.data), fm.stride, fm.normalized};
}

LabelMap apply_transform_labels(const TransformParams& phi, const LabelMap& labels) {
  if (labels.rank() != 2) throw validation_error("apply_transform_labels: want (H,W)");
  int oh = 0, ow = 0;
  auto map = index_map(phi, labels.dim(0), labels.dim(1), &oh, &ow);
  LabelMap out({oh, ow});
  for (int o = 0; o < oh * ow; ++o) out[o] = labels[map[static_cast<size_t>(o)]];
  return out;
}

namespace {

struct WarpPlan {
  int oh, ow;
  // output pixel -> continuous input coordinates
  std::vector<double> src_y, src_x;
  bool exact;
  std::vector<int> exact_map;
};

WarpPlan plan_warp(const TransformParams& phi, int h, int w) {
  WarpPlan plan;
  if (phi.index_exact()) {
    plan.exact = true;
    plan.exact_map = index_map(phi, h, w, &plan.oh, &plan.ow);
    return plan;
  }
  plan.exact = false;
  int rh = std::max(1, static_cast<int>(std::lround(h * phi.scale)));
  int rw = std::max(1, static_cast<int>(std::lround(w * phi.scale)));
  int y0 = 0, x0 = 0, ch = rh, cw = rw;
  if (phi.has_crop) {
    y0 = phi.crop_y0;
    x0 = phi.crop_x0;
    ch = phi.crop_h;
    cw = phi.crop_w;
    if (y0 < 0 || x0 < 0 || ch < 1 || cw < 1 || y0 + ch > rh || x0 + cw > rw)
      throw validation_error("transform: crop window outside the scaled image");
  }
  plan.oh = phi.out_h > 0 ? phi.out_h : ch;
  plan.ow = phi.out_w > 0 ? phi.out_w : cw;
  plan.src_y.resize(static_cast<size_t>(plan.oh));
  plan.src_x.resize(static_cast<size_t>(plan.ow));
  for (int oy = 0; oy < plan.oh; ++oy) {
    double yc = y0 + (oy + 0.5) * ch / plan.oh - 0.5;  // scaled coords
    plan.src_y[static_cast<size_t>(oy)] = (yc + 0.5) * h / rh - 0.5;
  }
  for (int ox = 0; ox < plan.ow; ++ox) {
    int fx = phi.flip ? (plan.ow - 1 - ox) : ox;
    double xc = x0 + (fx + 0.5) * cw / plan.ow - 0.5;
    plan.src_x[static_cast<size_t>(ox)] = (xc + 0.5) * w / rw - 0.5;
  }
  return plan;
}

}  // namespace

Image warp_image(const TransformParams& phi, const Image& img) {
  const int h = img.dim(1), w = img.dim(2);
  WarpPlan plan = plan_warp(phi, h, w);
  if (plan.exact) return apply_transform(phi, img);
  Image out({3, plan.oh, plan.ow});
  for (int oy = 0; oy < plan.oh; ++oy) {
    double sy = plan.src_y[static_cast<size_t>(oy)];
    int iy0 = static_cast<int>(std::floor(sy));
    double fy = sy - iy0;
    int y0 = std::clamp(iy0, 0, h - 1), y1 = std::clamp(iy0 + 1, 0, h - 1);
    for (int ox = 0; ox < plan.ow; ++ox) {
      double sx = plan.src_x[static_cast<size_t>(ox)];
      int ix0 = static_cast<int>(std::floor(sx));
      double fx = sx - ix0;
      int x0 = std::clamp(ix0, 0, w - 1), x1 = std::clamp(ix0 + 1, 0, w - 1);
      for (int c = 0; c < 3; ++c) {
        double v = (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
                   fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
        out.at(c, oy, ox) = static_cast<float>(v);
      }
    }
  }
  return out;
}

LabelMap warp_labels(const TransformParams& phi, const LabelMap& labels) {
  const int h = labels.dim(0), w = labels.dim(1);
  WarpPlan plan = plan_warp(phi, h, w);
  if (plan.exact) return apply_transform_labels(phi, labels);
  LabelMap out({plan.oh, plan.ow});
  for (int oy = 0; oy < plan.oh; ++oy) {
    int iy = std::clamp(static_cast<int>(std::lround(plan.src_y[static_cast<size_t>(oy)])), 0, h - 1);
    for (int ox = 0; ox < plan.ow; ++ox) {
      int ix = std::clamp(static_cast<int>(std::lround(plan.src_x[static_cast<size_t>(ox)])), 0, w - 1);
      out.at(oy, ox) = labels.at(iy, ix);
    }
  }
  return out;
}

}  // namespace corr
}  // namespace svos

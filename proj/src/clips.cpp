#include "svos/clips.hpp"

#include <algorithm>
#include <cmath>

namespace svos {
namespace data {

Clip sample_training_clip(const VideoSequence& video, const MaskSource* masks, int n_frames,
                          int n_refs, Rng& rng) {
  const int T = video.length();
  if (n_refs < 1 || n_frames <= n_refs)
    throw validation_error("clip: need n_frames > n_refs >= 1");
  if (T < n_frames)
    throw validation_error("clip: video " + video.id + " has " + std::to_string(T) +
                           " frames, need " + std::to_string(n_frames));

  // distinct sorted frame indices via partial Fisher-Yates
  std::vector<int> pool(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) pool[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n_frames; ++i)
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(rng.uniform_int(i, T - 1))]);
  std::vector<int> picks(pool.begin(), pool.begin() + n_frames);
  std::sort(picks.begin(), picks.end());

  Clip clip;
  clip.has_masks = masks != nullptr;
  clip.object_count = masks ? masks->object_count() : 0;
  auto grab = [&](int idx) {
    Clip::FrameMask fm;
    fm.frame = video.frames[static_cast<size_t>(idx)];
    fm.index = idx;
    if (masks) fm.mask = masks->labels(idx);
    return fm;
  };
  for (int i = 0; i < n_refs; ++i) clip.references.push_back(grab(picks[static_cast<size_t>(i)]));
  clip.query = grab(picks.back());

  clip.aux_t = rng.uniform_int(0, T - 2);
  clip.aux_a = video.frames[static_cast<size_t>(clip.aux_t)];
  clip.aux_b = video.frames[static_cast<size_t>(clip.aux_t + 1)];

  if (T - 1 >= 5) {
    int t = 0, left = 0, right = 0;
    do {
      t = rng.uniform_int(0, T - 1);
      left = t - 5 >= 0 ? t - 4 : 0;           // count of 0..t-5
      right = t + 5 <= T - 1 ? T - t - 5 : 0;  // count of t+5..T-1
    } while (left + right == 0);               // t=0 always qualifies, so this ends
    int pick = rng.uniform_int(0, left + right - 1);
    int t2 = pick < left ? pick : t + 5 + (pick - left);
    clip.distant_t = t;
    clip.distant_t2 = t2;
  } else {
    clip.distant_t = 0;
    clip.distant_t2 = T - 1;
  }
  clip.distant_a = video.frames[static_cast<size_t>(clip.distant_t)];
  clip.distant_b = video.frames[static_cast<size_t>(clip.distant_t2)];
  return clip;
}

corr::TransformParams sample_augment_params(const AugmentConfig& cfg, int h, int w, Rng& rng) {
  corr::TransformParams p;
  p.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  int rh = std::max(1, static_cast<int>(std::lround(h * p.scale)));
  int rw = std::max(1, static_cast<int>(std::lround(w * p.scale)));
  double side = std::sqrt(rng.uniform(cfg.crop_area_min, 1.0));
  p.has_crop = true;
  p.crop_h = std::max(1, static_cast<int>(std::lround(rh * side)));
  p.crop_w = std::max(1, static_cast<int>(std::lround(rw * side)));
  p.crop_y0 = rng.uniform_int(0, rh - p.crop_h);
  p.crop_x0 = rng.uniform_int(0, rw - p.crop_w);
  p.flip = rng.bernoulli(cfg.flip_prob);
  p.out_h = cfg.out_h;
  p.out_w = cfg.out_w;
  return p;
}

Clip augment(const Clip& clip, const corr::TransformParams& params) {
  Clip out = clip;
  auto fm = [&](const Clip::FrameMask& in) {
    Clip::FrameMask o;
    o.index = in.index;
    o.frame = corr::warp_image(params, in.frame);
    if (in.mask.numel() > 0) o.mask = corr::warp_labels(params, in.mask);
    return o;
  };
  for (size_t i = 0; i < clip.references.size(); ++i) out.references[i] = fm(clip.references[i]);
  out.query = fm(clip.query);
  out.aux_a = corr::warp_image(params, clip.aux_a);
  out.aux_b = corr::warp_image(params, clip.aux_b);
  out.distant_a = corr::warp_image(params, clip.distant_a);
  out.distant_b = corr::warp_image(params, clip.distant_b);
  return out;
}

}  // namespace data
}  // namespace svos

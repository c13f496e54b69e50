#pragma once

#include <map>
#include <string>
#include <vector>

#include "svos/autodiff.hpp"
#include "svos/params.hpp"

namespace svos {
namespace net {

// Per-pixel embedding grid at a fixed stride relative to the input image.
struct FeatureMap {
  Tensor<float> data;  // (C,H,W)
  int stride = 1;
  bool normalized = false;

  int channels() const { return data.dim(0); }
  int h() const { return data.dim(1); }
  int w() const { return data.dim(2); }
};

// name -> tape leaf id for every parameter tensor
template <typename T>
struct Bindings {
  std::map<std::string, int> ids;

  int at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw validation_error("unknown parameter: " + name);
    return it->second;
  }
};

template <typename T>
Bindings<T> bind_raw(Tape<T>& tp, const std::map<std::string, Tensor<T>>& tensors,
                     bool trainable) {
  Bindings<T> b;
  for (const auto& [name, ten] : tensors) b.ids[name] = tp.leaf(ten, trainable);
  return b;
}

template <typename T>
Bindings<T> bind_params(Tape<T>& tp, const ModelParams& p, bool trainable) {
  Bindings<T> b;
  for (const auto& [name, ten] : p.tensors)
    b.ids[name] = tp.leaf(ten.template cast<T>(), trainable);
  return b;
}

template <typename T>
std::map<std::string, Tensor<T>> cast_params(const ModelParams& p) {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, ten] : p.tensors) out[name] = ten.template cast<T>();
  return out;
}

namespace detail {

template <typename T>
int res_block(Tape<T>& tp, const Bindings<T>& b, const std::string& prefix, int x) {
  int h = ad::conv2d(tp, x, b.at(prefix + ".c1.w"), b.at(prefix + ".c1.b"), 1, 1);
  h = ad::relu(tp, h);
  h = ad::conv2d(tp, h, b.at(prefix + ".c2.w"), b.at(prefix + ".c2.b"), 1, 1);
  return ad::relu(tp, ad::add(tp, h, x));
}

template <typename T>
int run_trunk(Tape<T>& tp, const Bindings<T>& b, const std::string& net, int x,
              const std::vector<ConvStage>& stages, std::vector<int>* stage_outs) {
  int h = x;
  for (size_t i = 0; i < stages.size(); ++i) {
    std::string sp = net + ".s" + std::to_string(i);
    h = ad::conv2d(tp, h, b.at(sp + ".conv.w"), b.at(sp + ".conv.b"), stages[i].stride, 1);
    h = ad::relu(tp, h);
    for (int j = 0; j < stages[i].res_blocks; ++j)
      h = res_block(tp, b, sp + ".r" + std::to_string(j), h);
    if (stage_outs) stage_outs->push_back(h);
  }
  return h;
}

}  // namespace detail

template <typename T>
struct EncoderNodes {
  int key = -1;                // unit-norm (D,h,w)
  std::vector<int> skips;      // one per upsampling level, deepest first
  int trunk = -1;
};

// E: frame (3,H,W) -> unit-norm key (D, H/stride, W/stride) plus the skip
// activations the decoder consumes.
template <typename T>
EncoderNodes<T> encode_visual_t(Tape<T>& tp, const Bindings<T>& b, const ArchDescriptor& a,
                                int frame) {
  const Tensor<T>& fv = tp.val(frame);
  if (fv.rank() != 3 || fv.dim(0) != 3) throw validation_error("encode_visual: want (3,H,W) frame");
  int s = a.stride();
  if (fv.dim(1) % s != 0 || fv.dim(2) % s != 0)
    throw validation_error("encode_visual: frame size " + std::to_string(fv.dim(1)) + "x" +
                           std::to_string(fv.dim(2)) + " not a multiple of stride " +
                           std::to_string(s));
  std::vector<int> outs;
  int trunk = detail::run_trunk(tp, b, "e", frame, a.e_stages, &outs);
  int key = ad::conv2d(tp, trunk, b.at("e.head.w"), b.at("e.head.b"), 1, 0);
  key = ad::l2norm_ch(tp, key);

  EncoderNodes<T> res;
  res.key = key;
  res.trunk = trunk;
  for (int i = static_cast<int>(a.e_stages.size()) - 1; i >= 0; --i)
    if (a.e_stages[static_cast<size_t>(i)].stride == 2)
      res.skips.push_back(outs[static_cast<size_t>(i - 1)]);
  return res;
}

// V: frame (3,H,W) + object mask (1,H,W) in [0,1] -> (D', H/stride, W/stride)
template <typename T>
int encode_frame_mask_t(Tape<T>& tp, const Bindings<T>& b, const ArchDescriptor& a, int frame,
                        int mask) {
  const Tensor<T>& fv = tp.val(frame);
  const Tensor<T>& mv = tp.val(mask);
  if (mv.rank() != 3 || mv.dim(0) != 1 || mv.dim(1) != fv.dim(1) || mv.dim(2) != fv.dim(2))
    throw validation_error("encode_frame_mask: mask must be (1,H,W) matching the frame");
  for (int i = 0; i < mv.numel(); ++i)
    if (!(mv[i] >= T(0) && mv[i] <= T(1)))
      throw validation_error("encode_frame_mask: mask value outside [0,1]");
  int x = ad::concat_ch(tp, frame, mask);
  int trunk = detail::run_trunk(tp, b, "v", x, a.v_stages, nullptr);
  return ad::conv2d(tp, trunk, b.at("v.head.w"), b.at("v.head.b"), 1, 0);
}

// D: fused (2*D', h, w) plus encoder skips -> logits (2, H, W) at image size
template <typename T>
int decode_mask_t(Tape<T>& tp, const Bindings<T>& b, const ArchDescriptor& a, int fused,
                  const std::vector<int>& skips) {
  const Tensor<T>& fv = tp.val(fused);
  if (fv.rank() != 3 || fv.dim(0) != 2 * a.v_dim)
    throw validation_error("decode_mask: fused channels " + std::to_string(fv.dim(0)) +
                           " != 2*D' = " + std::to_string(2 * a.v_dim));
  if (skips.size() != a.d_up_ch.size())
    throw validation_error("decode_mask: skip count mismatch");
  int h = ad::conv2d(tp, fused, b.at("d.in.w"), b.at("d.in.b"), 1, 0);
  h = ad::relu(tp, h);
  h = detail::res_block(tp, b, "d.res", h);
  for (size_t i = 0; i < a.d_up_ch.size(); ++i) {
    h = ad::upsample2x(tp, h);
    h = ad::concat_ch(tp, h, skips[i]);
    std::string up = "d.up" + std::to_string(i);
    h = ad::conv2d(tp, h, b.at(up + ".fuse.w"), b.at(up + ".fuse.b"), 1, 0);
    h = ad::relu(tp, h);
    if (i == 0) h = detail::res_block(tp, b, up + ".res", h);
  }
  return ad::conv2d(tp, h, b.at("d.out.w"), b.at("d.out.b"), 1, 0);
}

// --------------------------------------------------------------------------
// Plain forward-only wrappers used by clustering, inference, and tests.

struct VisualFeatures {
  FeatureMap key;
  std::vector<FeatureMap> skips;  // deepest first
};

inline VisualFeatures encode_visual(const ModelParams& p, const Tensor<float>& frame) {
  Tape<float> tp(false);
  auto b = bind_params(tp, p, false);
  int f = tp.leaf(frame);
  auto nodes = encode_visual_t(tp, b, p.arch, f);
  VisualFeatures out;
  out.key = {tp.val(nodes.key), p.arch.stride(), true};
  for (int s : nodes.skips) {
    int sstride = frame.dim(1) / tp.val(s).dim(1);
    out.skips.push_back({tp.val(s), sstride, false});
  }
  return out;
}

inline FeatureMap encode_frame_mask(const ModelParams& p, const Tensor<float>& frame,
                                    const Tensor<float>& mask) {
  Tape<float> tp(false);
  auto b = bind_params(tp, p, false);
  int id = encode_frame_mask_t(tp, b, p.arch, tp.leaf(frame), tp.leaf(mask));
  return {tp.val(id), p.arch.stride(), false};
}

inline Tensor<float> decode_mask(const ModelParams& p, const FeatureMap& fused,
                                 const std::vector<FeatureMap>& skips) {
  Tape<float> tp(false);
  auto b = bind_params(tp, p, false);
  std::vector<int> skip_ids;
  skip_ids.reserve(skips.size());
  for (const auto& s : skips) skip_ids.push_back(tp.leaf(s.data));
  int id = decode_mask_t(tp, b, p.arch, tp.leaf(fused.data), skip_ids);
  return tp.val(id);
}

}  // namespace net
}  // namespace svos

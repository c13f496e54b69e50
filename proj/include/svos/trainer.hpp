#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svos/affinity.hpp"
#include "svos/clips.hpp"
#include "svos/losses.hpp"
#include "svos/networks.hpp"
#include "svos/pseudo.hpp"
#include "svos/trainconfig.hpp"

namespace svos {
namespace train {

struct LossTerms {
  double seg = 0, short_term = 0, long_term = 0, total = 0;
  bool has_seg = false;
};

// L = L_Seg + lambda1 * L_Short + lambda2 * L_Long; rejects non-finite terms.
double total_loss(double l_seg, double l_short, double l_long, double lambda1, double lambda2);

// Per-clip plan: the sampled loss-path transforms (flip / integer-cell crops
// at feature resolution) plus the active weights. Pinned up front so the
// whole loss is a deterministic function of (params, clip, plan).
struct ClipLossPlan {
  corr::TransformParams phi_short;
  corr::TransformParams phi_long;
  bool with_seg = false;
  double lambda1 = 0.1, lambda2 = 0.5;
  double temperature = 0.07;
};

ClipLossPlan sample_plan(const TrainConfig& cfg, bool with_seg, int grid_h, int grid_w, Rng& rng);

template <typename T>
struct ClipLossNodes {
  int total = -1, seg = -1, short_term = -1, long_term = -1;
  int objects = 0;
};

namespace detail {

template <typename T>
int leaf_image(Tape<T>& tp, const Tensor<float>& img) {
  return tp.leaf(img.template cast<T>(), false);
}

template <typename T>
std::vector<int> argmax_match(const Tensor<T>& a, const Tensor<T>& b) {
  // a, b: (C,h,w) unit-norm grids; best cosine match of each a-pixel in b
  const int c = a.dim(0), hwa = a.dim(1) * a.dim(2), hwb = b.dim(1) * b.dim(2);
  std::vector<int> out(static_cast<size_t>(hwa));
  for (int k = 0; k < hwa; ++k) {
    int best = 0;
    double bs = -1e300;
    for (int o = 0; o < hwb; ++o) {
      double s = 0;
      for (int ch = 0; ch < c; ++ch)
        s += static_cast<double>(a[ch * hwa + k]) * static_cast<double>(b[ch * hwb + o]);
      if (s > bs) {
        bs = s;
        best = o;
      }
    }
    out[static_cast<size_t>(k)] = best;
  }
  return out;
}

// nearest-neighbor downsample of labels to the feature grid (cell centers)
inline LabelMap labels_at_grid(const LabelMap& labels, int stride) {
  const int gh = labels.dim(0) / stride, gw = labels.dim(1) / stride;
  LabelMap out({gh, gw});
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x)
      out.at(y, x) = labels.at(y * stride + stride / 2, x * stride + stride / 2);
  return out;
}

}  // namespace detail

// Builds the Eq.-16 style loss for one clip on the tape: mask-embedded
// segmentation (when masks are present) plus the two equivariant
// correspondence terms. Templated so the finite-difference harness can run
// it at double precision.
template <typename T>
ClipLossNodes<T> build_clip_loss(Tape<T>& tp, const net::Bindings<T>& b,
                                 const net::ArchDescriptor& arch, const data::Clip& clip,
                                 const ClipLossPlan& plan) {
  using namespace net;
  const int stride = arch.stride();
  ClipLossNodes<T> out;
  std::vector<int> term_ids;
  std::vector<T> term_ws;

  // ---- short-term consistency: E(phi(I_t)) vs phi(E(I_t+1)) -------------
  {
    corr::TransformParams phi_img = plan.phi_short.at_scale(stride, 1);
    int at = detail::leaf_image(tp, corr::apply_transform(phi_img, clip.aux_a));
    auto ea = encode_visual_t(tp, b, arch, at);
    int xa = ad::chw_to_rows(tp, ea.key);

    int bt = detail::leaf_image(tp, clip.aux_b);
    auto eb = encode_visual_t(tp, b, arch, bt);
    const Tensor<T>& kb = tp.val(eb.key);
    int oh = 0, ow = 0;
    auto map = corr::index_map(plan.phi_short, kb.dim(1), kb.dim(2), &oh, &ow);
    int xb = ad::chw_to_rows(tp, ad::remap_spatial(tp, eb.key, map, oh, ow));

    out.short_term = corr::loss_short_t(tp, xa, xb, static_cast<T>(plan.temperature));
    term_ids.push_back(out.short_term);
    term_ws.push_back(static_cast<T>(plan.lambda1));
  }

  // ---- long-term dependency: pseudo-matched contrast across distant pair --
  {
    corr::TransformParams phi_img = plan.phi_long.at_scale(stride, 1);
    // match source E(phi(I_t')) is constant: no gradient flows through argmax
    int dt = detail::leaf_image(tp, corr::apply_transform(phi_img, clip.distant_b));
    auto ed = encode_visual_t(tp, b, arch, dt);

    int tt = detail::leaf_image(tp, clip.distant_a);
    auto et = encode_visual_t(tp, b, arch, tt);

    std::vector<int> match = detail::argmax_match(tp.val(ed.key), tp.val(et.key));

    int db = detail::leaf_image(tp, clip.distant_b);
    auto edb = encode_visual_t(tp, b, arch, db);
    const Tensor<T>& kd = tp.val(edb.key);
    int oh = 0, ow = 0;
    auto map = corr::index_map(plan.phi_long, kd.dim(1), kd.dim(2), &oh, &ow);
    int xdt = ad::chw_to_rows(tp, ad::remap_spatial(tp, edb.key, map, oh, ow));
    int xt = ad::chw_to_rows(tp, et.key);

    out.long_term = corr::loss_long_t(tp, xdt, xt, match, static_cast<T>(plan.temperature));
    term_ids.push_back(out.long_term);
    term_ws.push_back(static_cast<T>(plan.lambda2));
  }

  // ---- mask-embedded segmentation --------------------------------------
  if (plan.with_seg && clip.has_masks && clip.object_count > 0) {
    if (clip.query.mask.numel() == 0)
      throw validation_error("segmentation step: clip has no query mask");
    const int K = clip.object_count;
    const int N = static_cast<int>(clip.references.size());
    const int gh = clip.query.frame.dim(1) / stride, gw = clip.query.frame.dim(2) / stride;
    const int hw = gh * gw;

    std::vector<EncoderNodes<T>> ref_nodes;
    std::vector<int> ref_rows;
    for (const auto& r : clip.references) {
      auto e = encode_visual_t(tp, b, arch, detail::leaf_image(tp, r.frame));
      ref_rows.push_back(ad::chw_to_rows(tp, e.key));
      ref_nodes.push_back(std::move(e));
    }
    auto eq = encode_visual_t(tp, b, arch, detail::leaf_image(tp, clip.query.frame));

    int ref_stack = ad::stack_rows(tp, ref_rows);
    int q_rows = ad::chw_to_rows(tp, eq.key);
    int sims = ad::matmul_nt(tp, ref_stack, q_rows);
    sims = ad::scale(tp, sims, static_cast<T>(1.0 / plan.temperature));
    int aff = ad::softmax_cols(tp, sims);  // (N*hw, hw), columns sum to 1

    // stacked one-hot reference masks at grid resolution (constant)
    Tensor<T> y_stack({N * hw, K + 1});
    for (int n = 0; n < N; ++n) {
      LabelMap g = detail::labels_at_grid(clip.references[static_cast<size_t>(n)].mask, stride);
      for (int p = 0; p < hw; ++p) {
        int id = g[p] <= K ? g[p] : 0;
        y_stack.at(n * hw + p, id) = T(1);
      }
    }
    int ybar_rows = ad::matmul_tn(tp, aff, tp.leaf(std::move(y_stack)));
    int ybar_map = ad::rows_to_chw(tp, ybar_rows, gh, gw);

    int ups = 0;
    for (int s = stride; s > 1; s /= 2) ++ups;

    std::vector<int> ce_ids;
    for (int k = 1; k <= K; ++k) {
      std::vector<int> v_rows;
      for (const auto& r : clip.references) {
        Tensor<T> mk({1, r.frame.dim(1), r.frame.dim(2)});
        for (int p = 0; p < r.frame.dim(1) * r.frame.dim(2); ++p)
          mk[p] = r.mask[p] == k ? T(1) : T(0);
        int v = encode_frame_mask_t(tp, b, arch, detail::leaf_image(tp, r.frame),
                                    tp.leaf(std::move(mk)));
        v_rows.push_back(ad::chw_to_rows(tp, v));
      }
      int vr_stack = ad::stack_rows(tp, v_rows);
      int vq_rows = ad::matmul_tn(tp, aff, vr_stack);
      int vq_map = ad::rows_to_chw(tp, vq_rows, gh, gw);

      int ybar_k = ad::slice_ch(tp, ybar_map, k, k + 1);
      for (int u = 0; u < ups; ++u) ybar_k = ad::upsample2x(tp, ybar_k);
      ybar_k = ad::clamp01(tp, ybar_k);
      int vbar = encode_frame_mask_t(tp, b, arch,
                                     detail::leaf_image(tp, clip.query.frame), ybar_k);

      int fused = ad::concat_ch(tp, vq_map, vbar);
      int logits = decode_mask_t(tp, b, arch, fused, eq.skips);

      Tensor<float> target({clip.query.frame.dim(1), clip.query.frame.dim(2)});
      for (int p = 0; p < target.numel(); ++p)
        target[p] = clip.query.mask[p] == k ? 1.0f : 0.0f;
      ce_ids.push_back(ad::softmax_ce_map(tp, logits, target));
    }
    std::vector<T> ce_ws(ce_ids.size(), static_cast<T>(1.0 / K));
    out.seg = ad::weighted_sum(tp, ce_ids, ce_ws);
    out.objects = K;
    term_ids.push_back(out.seg);
    term_ws.push_back(T(1));
  }

  out.total = ad::weighted_sum(tp, term_ids, term_ws);
  return out;
}

using GradMap = std::map<std::string, Tensor<float>>;

// Float forward+backward for one clip; fills per-parameter gradients.
LossTerms clip_loss_and_grads(const net::ModelParams& params, const data::Clip& clip,
                              const ClipLossPlan& plan, GradMap* grads);

// ---------------------------------------------------------------------------

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t steps = 0;
  GradMap m, v;

  void step(net::ModelParams& params, const GradMap& grads, double lr);
  void reset() {
    steps = 0;
    m.clear();
    v.clear();
  }
};

struct PseudoMaskSource : data::MaskSource {
  const cluster::PseudoMaskSet* set;
  explicit PseudoMaskSource(const cluster::PseudoMaskSet& s) : set(&s) {}
  LabelMap labels(int t) const override { return set->labels.at(static_cast<size_t>(t)); }
  int object_count() const override { return set->object_count(); }
};

struct TrainResult {
  net::ModelParams params;
  std::vector<LossTerms> curve;  // one entry per epoch
  std::string checkpoint_path;
};

// Two-stage schedule: correspondence-only warm-up, then the full loss with
// pseudo masks refreshed every recluster_period epochs. Writes loss curves,
// per-epoch checkpoints, and pseudo-mask snapshots; resumes from out_dir.
TrainResult train(const TrainConfig& cfg, const std::string& dataset_root,
                  const std::string& out_dir, bool resume = false);

// Re-clusters every video with the current encoder; a failing video keeps
// its previous mask set and is reported on stderr.
std::vector<cluster::PseudoMaskSet> update_pseudo_labels(
    const net::ModelParams& params, const std::vector<data::VideoSequence>& videos,
    const TrainConfig& cfg, int epoch_tag, const std::string& dataset_root,
    const std::vector<cluster::PseudoMaskSet>* previous = nullptr);

}  // namespace train
}  // namespace svos

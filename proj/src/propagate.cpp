#include "svos/propagate.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "svos/params.hpp"

namespace fs = std::filesystem;

namespace svos {
namespace infer {

MaskSet aggregate_objects(const std::vector<Tensor<float>>& per_object_fg_probs, int h, int w) {
  const int k = static_cast<int>(per_object_fg_probs.size());
  MaskSet out;
  out.p = Tensor<float>({k + 1, h, w});
  const int hw = h * w;
  for (const auto& p : per_object_fg_probs) {
    if (p.numel() != hw) throw validation_error("aggregate_objects: resolution mismatch");
    for (int i = 0; i < p.numel(); ++i)
      if (p[i] < -1e-5f || p[i] > 1.0f + 1e-5f)
        throw validation_error("aggregate_objects: probability outside [0,1]");
  }
  for (int i = 0; i < hw; ++i) {
    double bg = 1.0;
    for (int c = 0; c < k; ++c) {
      float v = std::clamp(per_object_fg_probs[static_cast<size_t>(c)][i], 0.0f, 1.0f);
      out.p[(c + 1) * hw + i] = v;
      bg *= 1.0 - v;
    }
    out.p[i] = static_cast<float>(bg);
    double z = bg;
    for (int c = 0; c < k; ++c) z += out.p[(c + 1) * hw + i];
    if (z <= 0) {
      out.p[i] = 1.0f;  // all-object probabilities zero and bg zero cannot
      z = 1.0;          // happen together, but stay safe
    }
    for (int c = 0; c <= k; ++c)
      out.p[c * hw + i] = static_cast<float>(out.p[c * hw + i] / z);
  }
  return out;
}

MaskSet upsample_mask(const MaskSet& m, int factor) {
  MaskSet cur = m;
  for (int f = factor; f > 1; f /= 2) {
    if (f % 2) throw validation_error("upsample_mask: factor must be a power of two");
    Tape<float> tp(false);
    int id = ad::upsample2x(tp, tp.leaf(cur.p));
    cur.p = tp.val(id);
  }
  cur.stride = std::max(1, m.stride / factor);
  return cur;
}

MaskSet downsample_mask(const MaskSet& m, int factor) {
  const int c = m.p.dim(0), h = m.h() / factor, w = m.w() / factor;
  MaskSet out;
  out.stride = m.stride * factor;
  out.p = Tensor<float>({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            acc += m.p.at(ch, y * factor + dy, x * factor + dx);
        out.p.at(ch, y, x) = static_cast<float>(acc / (factor * factor));
      }
  return out;
}

namespace {

// fg probability map from 2-channel logits
Tensor<float> fg_prob(const Tensor<float>& logits) {
  const int hw = logits.dim(1) * logits.dim(2);
  Tensor<float> out({logits.dim(1), logits.dim(2)});
  for (int i = 0; i < hw; ++i) {
    double d = static_cast<double>(logits[hw + i]) - logits[i];
    out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-d)));
  }
  return out;
}

BankEntry make_entry(const net::ModelParams& params, const Image& frame, const MaskSet& mask,
                     int frame_index, int stride) {
  BankEntry e;
  e.frame_index = frame_index;
  net::VisualFeatures vf = net::encode_visual(params, frame);
  e.key = std::move(vf.key);
  e.mask_image = mask;
  e.mask_grid = downsample_mask(mask, stride);
  Tape<float> tp(false);
  auto b = net::bind_params(tp, params, false);
  int frame_id = tp.leaf(frame);
  for (int k = 1; k <= mask.objects(); ++k) {
    Tensor<float> mk({1, frame.dim(1), frame.dim(2)});
    const int hw = frame.dim(1) * frame.dim(2);
    for (int i = 0; i < hw; ++i) mk[i] = std::clamp(mask.p[k * hw + i], 0.0f, 1.0f);
    int v = net::encode_frame_mask_t(tp, b, params.arch, frame_id, tp.leaf(std::move(mk)));
    e.values.push_back({tp.val(v), stride, false});
  }
  return e;
}

}  // namespace

MaskSet refine(const net::ModelParams& params, const Image& query_frame, const MaskSet& coarse,
               const std::vector<net::FeatureMap>& vq_per_object,
               const std::vector<net::FeatureMap>& skips, int rounds, int* v_calls) {
  if (rounds < 0) throw validation_error("refine: rounds must be >= 0");
  const int k = static_cast<int>(vq_per_object.size());
  const int h = query_frame.dim(1), w = query_frame.dim(2);
  if (v_calls) *v_calls = 0;

  Tape<float> tp(false);
  auto b = net::bind_params(tp, params, false);
  int frame_id = tp.leaf(query_frame);
  std::vector<int> skip_ids;
  for (const auto& s : skips) skip_ids.push_back(tp.leaf(s.data));
  std::vector<int> vq_ids;
  for (const auto& v : vq_per_object) vq_ids.push_back(tp.leaf(v.data));

  auto decode_with = [&](int k_idx, int vbar_id) {
    int fused = ad::concat_ch(tp, vq_ids[static_cast<size_t>(k_idx)], vbar_id);
    int logits = net::decode_mask_t(tp, b, params.arch, fused, skip_ids);
    return fg_prob(tp.val(logits));
  };

  if (rounds == 0) {
    // neutral mask embedding: decode from V_q alone, V never sees the query
    std::vector<Tensor<float>> probs;
    for (int ki = 0; ki < k; ++ki) {
      Tensor<float> zeros({vq_per_object[static_cast<size_t>(ki)].channels(),
                           vq_per_object[static_cast<size_t>(ki)].h(),
                           vq_per_object[static_cast<size_t>(ki)].w()});
      probs.push_back(decode_with(ki, tp.leaf(std::move(zeros))));
    }
    return aggregate_objects(probs, h, w);
  }

  MaskSet current = coarse;
  for (int r = 1; r <= rounds; ++r) {
    std::vector<Tensor<float>> probs;
    const int hw = h * w;
    for (int ki = 0; ki < k; ++ki) {
      Tensor<float> mk({1, h, w});
      for (int i = 0; i < hw; ++i)
        mk[i] = std::clamp(current.p[(ki + 1) * hw + i], 0.0f, 1.0f);
      int vbar = net::encode_frame_mask_t(tp, b, params.arch, frame_id, tp.leaf(std::move(mk)));
      if (v_calls) ++(*v_calls);
      probs.push_back(decode_with(ki, vbar));
    }
    current = aggregate_objects(probs, h, w);
  }
  return current;
}

std::vector<MaskSet> infer_video(const net::ModelParams& params,
                                 const data::VideoSequence& video, const MaskSet& first_mask,
                                 const InferConfig& cfg, InferTrace* trace) {
  if (video.length() == 0) throw validation_error("infer: empty video");
  if (first_mask.h() != video.height() || first_mask.w() != video.width())
    throw validation_error("infer: first mask is " + std::to_string(first_mask.h()) + "x" +
                           std::to_string(first_mask.w()) + ", video frames are " +
                           std::to_string(video.height()) + "x" + std::to_string(video.width()));
  first_mask.validate(1e-4f);
  if (cfg.window < 0 || cfg.rounds < 0) throw validation_error("infer: bad window/rounds");

  const int stride = params.arch.stride();
  const int K = first_mask.objects();
  std::vector<MaskSet> out;
  out.push_back(first_mask);
  if (video.length() == 1) return out;

  if (cfg.mode == InferConfig::Mode::Copy) {
    for (int t = 1; t < video.length(); ++t) {
      out.push_back(first_mask);
      if (trace) trace->steps.push_back({t, {0}, 0, 0.0});
    }
    return out;
  }

  ReferenceBank bank(cfg.window);
  bank.pin_first(make_entry(params, video.frames[0], first_mask, 0, stride));

  for (int t = 1; t < video.length(); ++t) {
    auto t0 = std::chrono::steady_clock::now();
    const Image& frame = video.frames[static_cast<size_t>(t)];
    net::VisualFeatures qf = net::encode_visual(params, frame);

    auto refs = bank.entries();
    std::vector<const net::FeatureMap*> keys;
    std::vector<const MaskSet*> grid_masks;
    for (const auto* e : refs) {
      keys.push_back(&e->key);
      grid_masks.push_back(&e->mask_grid);
    }
    corr::AffinityMatrix a = corr::affinity(keys, qf.key, cfg.temperature);
    MaskSet coarse_grid = corr::warp_mask(a, grid_masks);
    MaskSet coarse = upsample_mask(coarse_grid, stride);

    MaskSet pred;
    int v_calls = 0;
    if (cfg.mode == InferConfig::Mode::Warp) {
      pred = coarse;
    } else {
      std::vector<net::FeatureMap> vq;
      for (int k = 1; k <= K; ++k) {
        std::vector<const net::FeatureMap*> vals;
        for (const auto* e : refs) vals.push_back(&e->values[static_cast<size_t>(k - 1)]);
        vq.push_back(corr::readout(a, vals));
      }
      pred = refine(params, frame, coarse, vq, qf.skips, cfg.rounds, &v_calls);
    }
    out.push_back(pred);
    bank.push(make_entry(params, frame, pred, t, stride));

    if (trace) {
      InferTrace::Step step;
      step.query = t;
      for (const auto* e : refs) step.refs.push_back(e->frame_index);
      step.v_calls_on_query = v_calls;
      step.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trace->steps.push_back(std::move(step));
    }
  }
  return out;
}

void write_predictions(const std::vector<MaskSet>& masks, const std::string& out_root,
                       const std::string& video_id, bool dump_probabilities) {
  fs::path dir = fs::path(out_root) / video_id;
  fs::create_directories(dir);
  for (size_t t = 0; t < masks.size(); ++t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu.png", t);
    write_png_labels((dir / buf).string(), argmax_labels(masks[t]));
  }
  if (dump_probabilities) {
    net::ModelParams blob;
    blob.arch = net::ArchDescriptor::tiny();
    for (size_t t = 0; t < masks.size(); ++t) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%05zu", t);
      blob.tensors[std::string("frame_") + buf] = masks[t].p;
    }
    net::save_checkpoint(blob, (dir / "probabilities.bin").string());
  }
}

}  // namespace infer
}  // namespace svos

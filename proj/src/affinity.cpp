#include "svos/affinity.hpp"

#include <cmath>

#include "svos/losses.hpp"

namespace svos {
namespace corr {

Tensor<float> stack_feature_rows(const std::vector<const net::FeatureMap*>& maps) {
  if (maps.empty()) throw validation_error("stack_feature_rows: no inputs");
  const int c = maps[0]->channels();
  int rows = 0;
  for (const auto* m : maps) {
    if (m->channels() != c)
      throw validation_error("feature channel mismatch: " + std::to_string(m->channels()) +
                             " vs " + std::to_string(c));
    rows += m->h() * m->w();
  }
  Tensor<float> out({rows, c});
  int off = 0;
  for (const auto* m : maps) {
    const int hw = m->h() * m->w();
    for (int p = 0; p < hw; ++p)
      for (int ch = 0; ch < c; ++ch) out.at(off + p, ch) = m->data[ch * hw + p];
    off += hw;
  }
  return out;
}

AffinityMatrix affinity(const std::vector<const net::FeatureMap*>& refs,
                        const net::FeatureMap& query, float temperature) {
  if (temperature <= 0) throw validation_error("affinity: temperature must be positive");
  for (const auto* r : refs) {
    if (r->channels() != query.channels())
      throw validation_error("affinity: channel mismatch: ref " + std::to_string(r->channels()) +
                             " vs query " + std::to_string(query.channels()));
    if (!r->normalized) throw validation_error("affinity: reference features not unit-norm");
  }
  if (!query.normalized) throw validation_error("affinity: query features not unit-norm");

  Tensor<float> ref_rows = stack_feature_rows(refs);
  Tensor<float> q_rows = stack_feature_rows({&query});
  const int p = ref_rows.dim(0), d = ref_rows.dim(1), q = q_rows.dim(0);

  AffinityMatrix a;
  a.temperature = temperature;
  a.w = Tensor<float>({p, q});
  ad::gemm_nt(ref_rows.data(), q_rows.data(), a.w.data(), p, d, q, false);
  // column softmax over the reference axis
  for (int j = 0; j < q; ++j) {
    float m = -1e30f;
    for (int i = 0; i < p; ++i) m = std::max(m, a.w.at(i, j));
    float z = 0;
    for (int i = 0; i < p; ++i) {
      float e = std::exp((a.w.at(i, j) - m) / temperature);
      a.w.at(i, j) = e;
      z += e;
    }
    for (int i = 0; i < p; ++i) a.w.at(i, j) /= z;
  }
  return a;
}

AffinityMatrix affinity(const net::FeatureMap& ref, const net::FeatureMap& query,
                        float temperature) {
  return affinity(std::vector<const net::FeatureMap*>{&ref}, query, temperature);
}

Tensor<float> readout(const AffinityMatrix& a, const Tensor<float>& ref_rows) {
  if (ref_rows.rank() != 2 || ref_rows.dim(0) != a.ref_pixels())
    throw validation_error("readout: value rows " + shape_str(ref_rows.shape) +
                           " do not match affinity rows " + std::to_string(a.ref_pixels()));
  Tensor<float> out({a.query_pixels(), ref_rows.dim(1)});
  ad::gemm_tn(a.w.data(), ref_rows.data(), out.data(), a.ref_pixels(), a.query_pixels(),
              ref_rows.dim(1), false);
  return out;
}

net::FeatureMap readout(const AffinityMatrix& a, const std::vector<const net::FeatureMap*>& refs) {
  Tensor<float> rows = readout(a, stack_feature_rows(refs));
  const int h = refs[0]->h(), w = refs[0]->w(), c = rows.dim(1);
  if (a.query_pixels() != h * w)
    throw validation_error("readout: query pixel count does not form the reference grid");
  net::FeatureMap fm;
  fm.stride = refs[0]->stride;
  fm.normalized = false;
  fm.data = Tensor<float>({c, h, w});
  for (int p = 0; p < h * w; ++p)
    for (int ch = 0; ch < c; ++ch) fm.data[ch * h * w + p] = rows.at(p, ch);
  return fm;
}

MaskSet warp_mask(const AffinityMatrix& a, const std::vector<const MaskSet*>& ref_masks) {
  if (ref_masks.empty()) throw validation_error("warp_mask: no reference masks");
  const int ch = ref_masks[0]->p.dim(0);
  const int h = ref_masks[0]->h(), w = ref_masks[0]->w();
  int rows = 0;
  for (const auto* m : ref_masks) {
    if (m->p.dim(0) != ch)
      throw validation_error("warp_mask: object count differs across references: " +
                             std::to_string(m->p.dim(0) - 1) + " vs " + std::to_string(ch - 1));
    rows += m->h() * m->w();
  }
  if (rows != a.ref_pixels())
    throw validation_error("warp_mask: mask pixels " + std::to_string(rows) +
                           " != affinity rows " + std::to_string(a.ref_pixels()));

  Tensor<float> stacked({rows, ch});
  int off = 0;
  for (const auto* m : ref_masks) {
    const int hw = m->h() * m->w();
    for (int p = 0; p < hw; ++p)
      for (int c = 0; c < ch; ++c) stacked.at(off + p, c) = m->p[c * hw + p];
    off += hw;
  }
  Tensor<float> rows_out = readout(a, stacked);
  MaskSet out;
  out.stride = ref_masks[0]->stride;
  out.p = Tensor<float>({ch, h, w});
  if (a.query_pixels() != h * w)
    throw validation_error("warp_mask: query pixel count does not form the reference grid");
  for (int p = 0; p < h * w; ++p)
    for (int c = 0; c < ch; ++c) out.p[c * h * w + p] = rows_out.at(p, c);
  return out;
}

namespace {

Tensor<double> rows_of(const net::FeatureMap& fm) {
  const int c = fm.channels(), hw = fm.h() * fm.w();
  Tensor<double> rows({hw, c});
  for (int p = 0; p < hw; ++p)
    for (int ch = 0; ch < c; ++ch) rows.at(p, ch) = fm.data[ch * hw + p];
  return rows;
}

Tensor<float> grad_to_map(const Tensor<double>& rows, int c, int h, int w) {
  Tensor<float> out({c, h, w});
  for (int p = 0; p < h * w; ++p)
    for (int ch = 0; ch < c; ++ch)
      out[ch * h * w + p] = static_cast<float>(rows.at(p, ch));
  return out;
}

}  // namespace

LossResult loss_short(const net::FeatureMap& feat_transformed_t,
                      const net::FeatureMap& feat_t1_transformed, float temperature) {
  Tape<double> tp;
  int xa = tp.leaf(rows_of(feat_transformed_t), true);
  int xb = tp.leaf(rows_of(feat_t1_transformed), true);
  int loss = loss_short_t(tp, xa, xb, static_cast<double>(temperature));
  tp.backward(loss);
  LossResult r;
  r.value = tp.val(loss)[0];
  r.grad_a = grad_to_map(tp.grad(xa), feat_transformed_t.channels(), feat_transformed_t.h(),
                         feat_transformed_t.w());
  r.grad_b = grad_to_map(tp.grad(xb), feat_t1_transformed.channels(), feat_t1_transformed.h(),
                         feat_t1_transformed.w());
  return r;
}

std::vector<int> pseudo_match(const net::FeatureMap& feat_transformed_distant,
                              const net::FeatureMap& feat_t, float temperature) {
  if (temperature <= 0) throw validation_error("pseudo_match: temperature must be positive");
  if (feat_transformed_distant.channels() != feat_t.channels())
    throw validation_error("pseudo_match: channel mismatch");
  const int c = feat_t.channels();
  const int hw_a = feat_transformed_distant.h() * feat_transformed_distant.w();
  const int hw_b = feat_t.h() * feat_t.w();
  std::vector<int> out(static_cast<size_t>(hw_a));
  // the softmax is monotone in the raw dot product, so argmax over
  // similarities decides the match and ties break to the lowest index
  for (int k = 0; k < hw_a; ++k) {
    int best = 0;
    double best_sim = -1e300;
    for (int o = 0; o < hw_b; ++o) {
      double s = 0;
      for (int ch = 0; ch < c; ++ch)
        s += static_cast<double>(feat_transformed_distant.data[ch * hw_a + k]) *
             feat_t.data[ch * hw_b + o];
      if (s > best_sim) {
        best_sim = s;
        best = o;
      }
    }
    out[static_cast<size_t>(k)] = best;
  }
  return out;
}

LossResult loss_long(const net::FeatureMap& feat_distant_transformed,
                     const net::FeatureMap& feat_t, const std::vector<int>& match,
                     float temperature) {
  Tape<double> tp;
  int xdt = tp.leaf(rows_of(feat_distant_transformed), true);
  int xt = tp.leaf(rows_of(feat_t), true);
  int loss = loss_long_t(tp, xdt, xt, match, static_cast<double>(temperature));
  tp.backward(loss);
  LossResult r;
  r.value = tp.val(loss)[0];
  r.grad_a = grad_to_map(tp.grad(xdt), feat_distant_transformed.channels(),
                         feat_distant_transformed.h(), feat_distant_transformed.w());
  r.grad_b = grad_to_map(tp.grad(xt), feat_t.channels(), feat_t.h(), feat_t.w());
  return r;
}

}  // namespace corr
}  // namespace svos

#include "svos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "svos/error.hpp"

namespace svos {
namespace eval {

double region_similarity(const LabelMap& pred, const LabelMap& gt, int object_id) {
  if (pred.shape != gt.shape) throw validation_error("region_similarity: shape mismatch");
  if (object_id < 1 || object_id > 255)
    throw validation_error("region_similarity: invalid object id " + std::to_string(object_id));
  long long inter = 0, uni = 0;
  for (int i = 0; i < pred.numel(); ++i) {
    bool a = pred[i] == object_id, b = gt[i] == object_id;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> boundary_pixels(const LabelMap& labels, int object_id) {
  const int h = labels.dim(0), w = labels.dim(1);
  std::vector<int> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (labels.at(y, x) != object_id) continue;
      bool edge = (y > 0 && labels.at(y - 1, x) != object_id) ||
                  (y + 1 < h && labels.at(y + 1, x) != object_id) ||
                  (x > 0 && labels.at(y, x - 1) != object_id) ||
                  (x + 1 < w && labels.at(y, x + 1) != object_id);
      if (edge) out.push_back(y * w + x);
    }
  return out;
}

int default_boundary_tolerance(int h, int w) {
  return static_cast<int>(std::ceil(0.008 * std::sqrt(static_cast<double>(h) * h +
                                                      static_cast<double>(w) * w)));
}

double contour_accuracy(const LabelMap& pred, const LabelMap& gt, int object_id,
                        int tolerance_px) {
  if (pred.shape != gt.shape) throw validation_error("contour_accuracy: shape mismatch");
  const int h = pred.dim(0), w = pred.dim(1);
  auto pb = boundary_pixels(pred, object_id);
  auto gb = boundary_pixels(gt, object_id);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;

  // disk offsets within the tolerance radius
  std::vector<std::pair<int, int>> disk;
  for (int dy = -tolerance_px; dy <= tolerance_px; ++dy)
    for (int dx = -tolerance_px; dx <= tolerance_px; ++dx)
      if (dy * dy + dx * dx <= tolerance_px * tolerance_px) disk.emplace_back(dy, dx);

  auto dilate = [&](const std::vector<int>& pts) {
    std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
    for (int p : pts) {
      int y = p / w, x = p % w;
      for (auto [dy, dx] : disk) {
        int ny = y + dy, nx = x + dx;
        if (ny >= 0 && ny < h && nx >= 0 && nx < w) mask[static_cast<size_t>(ny) * w + nx] = 1;
      }
    }
    return mask;
  };

  auto gt_zone = dilate(gb);
  auto pred_zone = dilate(pb);
  long long matched_pred = 0, matched_gt = 0;
  for (int p : pb) matched_pred += gt_zone[static_cast<size_t>(p)];
  for (int p : gb) matched_gt += pred_zone[static_cast<size_t>(p)];
  double precision = static_cast<double>(matched_pred) / pb.size();
  double recall = static_cast<double>(matched_gt) / gb.size();
  if (precision + recall == 0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double best_match_iou(const std::vector<LabelMap>& pseudo, const std::vector<LabelMap>& gt) {
  if (pseudo.size() != gt.size() || gt.empty())
    throw validation_error("best_match_iou: frame count mismatch");

  std::set<int> gt_ids, ps_ids;
  for (const auto& m : gt)
    for (uint8_t v : m.v)
      if (v) gt_ids.insert(v);
  for (const auto& m : pseudo)
    for (uint8_t v : m.v)
      if (v) ps_ids.insert(v);
  if (gt_ids.empty()) return 1.0;

  // pooled IoU over all frames per (gt id, pseudo id)
  std::vector<int> gids(gt_ids.begin(), gt_ids.end()), pids(ps_ids.begin(), ps_ids.end());
  const int ng = static_cast<int>(gids.size()), np = static_cast<int>(pids.size());
  std::vector<double> iou(static_cast<size_t>(ng) * std::max(np, 1), 0.0);
  for (int a = 0; a < ng; ++a)
    for (int b = 0; b < np; ++b) {
      long long inter = 0, uni = 0;
      for (size_t t = 0; t < gt.size(); ++t)
        for (int i = 0; i < gt[t].numel(); ++i) {
          bool ga = gt[t][i] == gids[static_cast<size_t>(a)];
          bool pb = pseudo[t][i] == pids[static_cast<size_t>(b)];
          inter += (ga && pb) ? 1 : 0;
          uni += (ga || pb) ? 1 : 0;
        }
      iou[static_cast<size_t>(a) * np + b] = uni ? static_cast<double>(inter) / uni : 0.0;
    }

  // exhaustive injective assignment of gt objects to pseudo ids (both sides
  // are tiny); unmatched gt objects score zero
  std::vector<int> order(static_cast<size_t>(np));
  for (int i = 0; i < np; ++i) order[static_cast<size_t>(i)] = i;
  double best = 0;
  std::vector<bool> used(static_cast<size_t>(np), false);
  std::function<void(int, double)> rec = [&](int a, double acc) {
    if (a == ng) {
      best = std::max(best, acc);
      return;
    }
    rec(a + 1, acc);  // leave gt object a unmatched
    for (int b = 0; b < np; ++b) {
      if (used[static_cast<size_t>(b)]) continue;
      used[static_cast<size_t>(b)] = true;
      rec(a + 1, acc + iou[static_cast<size_t>(a) * np + b]);
      used[static_cast<size_t>(b)] = false;
    }
  };
  rec(0, 0.0);
  return best / ng;
}

}  // namespace eval
}  // namespace svos

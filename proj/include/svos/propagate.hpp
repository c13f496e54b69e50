#pragma once

#include <deque>
#include <string>
#include <vector>

#include "svos/affinity.hpp"
#include "svos/dataset.hpp"
#include "svos/maskset.hpp"
#include "svos/networks.hpp"

namespace svos {
namespace infer {

struct InferConfig {
  int window = 20;  // prior frames kept next to the pinned first frame
  int rounds = 3;   // recurrent refinement rounds
  float temperature = 0.07f;
  enum class Mode { Refine, Warp, Copy } mode = Mode::Refine;
};

// Per-query bookkeeping for the causality / call-count audits and timing.
struct InferTrace {
  struct Step {
    int query = 0;
    std::vector<int> refs;
    int v_calls_on_query = 0;
    double seconds = 0;
  };
  std::vector<Step> steps;
};

// One cached reference: embeddings are computed once when the frame enters
// the bank and never touched again.
struct BankEntry {
  int frame_index = 0;
  net::FeatureMap key;                  // E features
  std::vector<net::FeatureMap> values;  // V embedding per object
  MaskSet mask_image;                   // soft mask at image resolution
  MaskSet mask_grid;                    // same, pooled to the feature grid
};

// First frame pinned forever; a sliding window of the most recent W entries.
class ReferenceBank {
 public:
  explicit ReferenceBank(int window) : window_(window) {}

  void pin_first(BankEntry e) { first_ = std::move(e); }
  void push(BankEntry e) {
    recent_.push_back(std::move(e));
    while (static_cast<int>(recent_.size()) > window_) recent_.pop_front();
  }

  std::vector<const BankEntry*> entries() const {
    std::vector<const BankEntry*> out;
    out.push_back(&first_);
    for (const auto& e : recent_) out.push_back(&e);
    return out;
  }

  size_t size() const { return 1 + recent_.size(); }

 private:
  int window_;
  BankEntry first_;
  std::deque<BankEntry> recent_;
};

// background = prod_k (1 - p_k), then per-pixel normalization
MaskSet aggregate_objects(const std::vector<Tensor<float>>& per_object_fg_probs, int h, int w);

// Recurrent refinement: round 0 decodes with a neutral (all-zero) mask
// embedding and no V call on the query frame; round r >= 1 re-embeds the
// previous mask with V and decodes again, starting from the coarse warp.
MaskSet refine(const net::ModelParams& params, const Image& query_frame, const MaskSet& coarse,
               const std::vector<net::FeatureMap>& vq_per_object,
               const std::vector<net::FeatureMap>& skips, int rounds, int* v_calls = nullptr);

std::vector<MaskSet> infer_video(const net::ModelParams& params,
                                 const data::VideoSequence& video, const MaskSet& first_mask,
                                 const InferConfig& cfg, InferTrace* trace = nullptr);

// argmax labels in the dataset mask layout: <out>/<video_id>/%05d.png
void write_predictions(const std::vector<MaskSet>& masks, const std::string& out_root,
                       const std::string& video_id, bool dump_probabilities = false);

// bilinear upsampling of a soft mask back to image resolution
MaskSet upsample_mask(const MaskSet& m, int factor);
MaskSet downsample_mask(const MaskSet& m, int factor);  // box average

}  // namespace infer
}  // namespace svos

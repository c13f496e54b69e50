#pragma once

#include <string>
#include <vector>

#include "svos/dataset.hpp"
#include "svos/kmeans.hpp"
#include "svos/params.hpp"

namespace svos {
namespace cluster {

// Space-time grid behind a flattened point list: index = (t*gh + y)*gw + x.
struct VideoGrid {
  int frames = 0;
  int gh = 0, gw = 0;
  int stride = 1;
  int image_h = 0, image_w = 0;
};

// Cluster-derived training targets: label 0 is pruned/background, survivors
// are renumbered 1..K' by descending size, upsampled to image resolution.
struct PseudoMaskSet {
  std::vector<LabelMap> labels;
  std::vector<int> survivors;  // original cluster ids, largest first
  int epoch = 0;
  bool empty = false;  // all clusters pruned; video skipped in step 2

  int object_count() const { return static_cast<int>(survivors.size()); }
};

struct ClusterConfig {
  int m = 5;
  float pe_weight = 0.1f;
  int pe_dims_per_axis = 8;
  float prune_threshold = 0.4f;
  KMeansOptions kmeans;
};

// Embeds every feature cell of every frame as [E features (+) weighted
// position code] and clusters them.
ClusterState cluster_video(const data::VideoSequence& video, const net::ModelParams& encoder,
                           int m, float pe_weight, int pe_dims_per_axis, uint64_t seed,
                           VideoGrid* grid_out = nullptr, const KMeansOptions& opts = {});

PseudoMaskSet derive_pseudo_masks(const ClusterState& state, const VideoGrid& grid,
                                  float prune_threshold);

// Indexed-PNG persistence under <root>/<video_id>/pseudo/<epoch>/.
void save_pseudo_masks(const PseudoMaskSet& set, const std::string& root,
                       const std::string& video_id);
PseudoMaskSet load_pseudo_masks(const std::string& root, const std::string& video_id, int epoch);
std::vector<int> list_pseudo_epochs(const std::string& root, const std::string& video_id);

}  // namespace cluster
}  // namespace svos

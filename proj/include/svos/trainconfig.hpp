#pragma once

#include <cstdint>
#include <string>

#include "svos/arch.hpp"

namespace svos {
namespace train {

// Everything a training run depends on; round-trips through key=value text
// and is printed at startup so a run is reproducible from its logged config.
struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.5;
  int stage1_epochs = 60;
  int stage2_epochs = 20;
  int recluster_period = 10;
  double stage1_lr = 1e-4;
  double stage2_lr = 1e-5;
  int lr_decay_every = 20;   // stage-1 step policy, x lr_decay_factor
  double lr_decay_factor = 0.5;
  int batch_size = 4;
  int n_refs = 2;
  int n_frames = 3;
  int clips_per_video = 2;
  int m_clusters = 5;
  double temperature = 0.07;
  double pe_weight = 0.1;
  int pe_dims = 8;
  double prune_threshold = 0.4;
  uint64_t seed = 1;
  int train_size = 64;
  int augment = 1;
  double aug_scale_min = 0.8;
  double aug_scale_max = 1.25;
  double aug_crop_area_min = 0.75;
  std::string arch = "desk";  // desk | paper | tiny

  void validate() const;
  net::ArchDescriptor descriptor() const;

  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  // single key override; throws on unknown keys
  void set(const std::string& key, const std::string& value);
};

}  // namespace train
}  // namespace svos

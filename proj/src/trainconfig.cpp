#include "svos/trainconfig.hpp"

#include <sstream>

#include "svos/error.hpp"

namespace svos {
namespace train {

void TrainConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0) throw validation_error("config: loss weights must be >= 0");
  if (stage1_epochs < 0 || stage2_epochs < 0) throw validation_error("config: negative epochs");
  if (recluster_period < 1) throw validation_error("config: recluster_period must be >= 1");
  if (stage1_lr <= 0 || stage2_lr <= 0 || lr_decay_every < 1 || lr_decay_factor <= 0)
    throw validation_error("config: learning-rate schedule fields must be positive");
  if (batch_size < 1 || n_refs < 1 || n_frames <= n_refs || clips_per_video < 1)
    throw validation_error("config: bad sampling fields");
  if (m_clusters < 1) throw validation_error("config: m_clusters must be >= 1");
  if (temperature <= 0) throw validation_error("config: temperature must be positive");
  if (pe_dims < 2 || pe_dims % 2) throw validation_error("config: pe_dims must be even and >= 2");
  if (prune_threshold <= 0 || prune_threshold > 1)
    throw validation_error("config: prune_threshold in (0,1]");
  if (train_size < 16) throw validation_error("config: train_size too small");
  descriptor();  // throws on unknown arch
}

net::ArchDescriptor TrainConfig::descriptor() const {
  if (arch == "desk") return net::ArchDescriptor::desk_scale();
  if (arch == "paper") return net::ArchDescriptor::defaults();
  if (arch == "tiny") return net::ArchDescriptor::tiny();
  throw validation_error("config: unknown arch '" + arch + "'");
}

std::string TrainConfig::to_text() const {
  std::ostringstream s;
  s.precision(12);
  s << "lambda1=" << lambda1 << "\n";
  s << "lambda2=" << lambda2 << "\n";
  s << "stage1_epochs=" << stage1_epochs << "\n";
  s << "stage2_epochs=" << stage2_epochs << "\n";
  s << "recluster_period=" << recluster_period << "\n";
  s << "stage1_lr=" << stage1_lr << "\n";
  s << "stage2_lr=" << stage2_lr << "\n";
  s << "lr_decay_every=" << lr_decay_every << "\n";
  s << "lr_decay_factor=" << lr_decay_factor << "\n";
  s << "batch_size=" << batch_size << "\n";
  s << "n_refs=" << n_refs << "\n";
  s << "n_frames=" << n_frames << "\n";
  s << "clips_per_video=" << clips_per_video << "\n";
  s << "m_clusters=" << m_clusters << "\n";
  s << "temperature=" << temperature << "\n";
  s << "pe_weight=" << pe_weight << "\n";
  s << "pe_dims=" << pe_dims << "\n";
  s << "prune_threshold=" << prune_threshold << "\n";
  s << "seed=" << seed << "\n";
  s << "train_size=" << train_size << "\n";
  s << "augment=" << augment << "\n";
  s << "aug_scale_min=" << aug_scale_min << "\n";
  s << "aug_scale_max=" << aug_scale_max << "\n";
  s << "aug_crop_area_min=" << aug_crop_area_min << "\n";
  s << "arch=" << arch << "\n";
  return s.str();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "lambda1") lambda1 = std::stod(value);
    else if (key == "lambda2") lambda2 = std::stod(value);
    else if (key == "stage1_epochs") stage1_epochs = std::stoi(value);
    else if (key == "stage2_epochs") stage2_epochs = std::stoi(value);
    else if (key == "recluster_period") recluster_period = std::stoi(value);
    else if (key == "stage1_lr") stage1_lr = std::stod(value);
    else if (key == "stage2_lr") stage2_lr = std::stod(value);
    else if (key == "lr_decay_every") lr_decay_every = std::stoi(value);
    else if (key == "lr_decay_factor") lr_decay_factor = std::stod(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "n_refs") n_refs = std::stoi(value);
    else if (key == "n_frames") n_frames = std::stoi(value);
    else if (key == "clips_per_video") clips_per_video = std::stoi(value);
    else if (key == "m_clusters") m_clusters = std::stoi(value);
    else if (key == "temperature") temperature = std::stod(value);
    else if (key == "pe_weight") pe_weight = std::stod(value);
    else if (key == "pe_dims") pe_dims = std::stoi(value);
    else if (key == "prune_threshold") prune_threshold = std::stod(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "train_size") train_size = std::stoi(value);
    else if (key == "augment") augment = std::stoi(value);
    else if (key == "aug_scale_min") aug_scale_min = std::stod(value);
    else if (key == "aug_scale_max") aug_scale_max = std::stod(value);
    else if (key == "aug_crop_area_min") aug_crop_area_min = std::stod(value);
    else if (key == "arch") arch = value;
    else throw validation_error("config: unknown key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw validation_error("config: bad value '" + value + "' for key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw validation_error("config: bad line '" + line + "'");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace train
}  // namespace svos

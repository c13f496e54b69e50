#include "svos/pseudo.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "svos/networks.hpp"
#include "svos/pe.hpp"

namespace fs = std::filesystem;

namespace svos {
namespace cluster {

ClusterState cluster_video(const data::VideoSequence& video, const net::ModelParams& encoder,
                           int m, float pe_weight, int pe_dims_per_axis, uint64_t seed,
                           VideoGrid* grid_out, const KMeansOptions& opts) {
  if (video.length() == 0) throw validation_error("cluster_video: empty video");
  const int stride = encoder.arch.stride();
  const int gh = video.height() / stride, gw = video.width() / stride;
  const int T = video.length();
  const int dim = encoder.arch.e_dim + 3 * pe_dims_per_axis;
  const int max_len = std::max({T, gh, gw});

  Tensor<float> points({T * gh * gw, dim});
  for (int t = 0; t < T; ++t) {
    net::VisualFeatures feats = net::encode_visual(encoder, video.frames[static_cast<size_t>(t)]);
    const int hw = gh * gw;
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        float* row = &points.at((t * gh + y) * gw + x, 0);
        for (int c = 0; c < encoder.arch.e_dim; ++c) row[c] = feats.key.data[c * hw + y * gw + x];
        auto pe = positional_encoding(t, y, x, pe_dims_per_axis, max_len);
        for (size_t i = 0; i < pe.size(); ++i)
          row[encoder.arch.e_dim + static_cast<int>(i)] = pe_weight * pe[i];
      }
  }
  if (grid_out) *grid_out = {T, gh, gw, stride, video.height(), video.width()};
  return kmeans(points, m, seed, opts);
}

PseudoMaskSet derive_pseudo_masks(const ClusterState& state, const VideoGrid& grid,
                                  float prune_threshold) {
  const int total = state.points();
  if (total != grid.frames * grid.gh * grid.gw)
    throw validation_error("derive_pseudo_masks: grid does not match assignment count");
  const int m = state.clusters();

  std::vector<int> counts(static_cast<size_t>(m), 0);
  for (int a : state.assign) counts[static_cast<size_t>(a)]++;

  // prune over-size clusters, order survivors by descending size
  std::vector<int> survivors;
  for (int c = 0; c < m; ++c)
    if (counts[static_cast<size_t>(c)] > 0 &&
        counts[static_cast<size_t>(c)] <= static_cast<double>(prune_threshold) * total)
      survivors.push_back(c);
  std::stable_sort(survivors.begin(), survivors.end(),
                   [&](int a, int b) { return counts[static_cast<size_t>(a)] > counts[static_cast<size_t>(b)]; });

  std::vector<int> relabel(static_cast<size_t>(m), 0);
  for (size_t i = 0; i < survivors.size(); ++i)
    relabel[static_cast<size_t>(survivors[i])] = static_cast<int>(i) + 1;

  PseudoMaskSet set;
  set.survivors = survivors;
  set.empty = survivors.empty();
  for (int t = 0; t < grid.frames; ++t) {
    LabelMap lm = make_labels(grid.image_h, grid.image_w);
    for (int y = 0; y < grid.image_h; ++y) {
      int gy = std::min(y / grid.stride, grid.gh - 1);
      for (int x = 0; x < grid.image_w; ++x) {
        int gx = std::min(x / grid.stride, grid.gw - 1);
        int a = state.assign[static_cast<size_t>((t * grid.gh + gy) * grid.gw + gx)];
        lm.at(y, x) = static_cast<uint8_t>(relabel[static_cast<size_t>(a)]);
      }
    }
    set.labels.push_back(std::move(lm));
  }
  return set;
}

namespace {
std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", i);
  return buf;
}
}  // namespace

void save_pseudo_masks(const PseudoMaskSet& set, const std::string& root,
                       const std::string& video_id) {
  fs::path dir = fs::path(root) / video_id / "pseudo" / std::to_string(set.epoch);
  fs::create_directories(dir);
  for (size_t t = 0; t < set.labels.size(); ++t)
    write_png_labels((dir / frame_name(static_cast<int>(t))).string(), set.labels[t]);
  std::ofstream meta(dir / "survivors.txt");
  meta << set.object_count() << "\n";
  for (int s : set.survivors) meta << s << "\n";
}

PseudoMaskSet load_pseudo_masks(const std::string& root, const std::string& video_id, int epoch) {
  fs::path dir = fs::path(root) / video_id / "pseudo" / std::to_string(epoch);
  if (!fs::is_directory(dir)) throw io_error("no pseudo masks at " + dir.string());
  PseudoMaskSet set;
  set.epoch = epoch;
  std::ifstream meta(dir / "survivors.txt");
  if (!meta) throw io_error("missing survivors.txt in " + dir.string());
  int k = 0;
  meta >> k;
  set.survivors.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) meta >> set.survivors[static_cast<size_t>(i)];
  set.empty = k == 0;
  for (int t = 0;; ++t) {
    fs::path p = dir / frame_name(t);
    if (!fs::exists(p)) break;
    set.labels.push_back(read_png_labels(p.string()));
  }
  return set;
}

std::vector<int> list_pseudo_epochs(const std::string& root, const std::string& video_id) {
  fs::path dir = fs::path(root) / video_id / "pseudo";
  std::vector<int> epochs;
  if (!fs::is_directory(dir)) return epochs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) epochs.push_back(std::stoi(e.path().filename().string()));
  std::sort(epochs.begin(), epochs.end());
  return epochs;
}

}  // namespace cluster
}  // namespace svos

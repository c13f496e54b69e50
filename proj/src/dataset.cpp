#include "svos/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;

namespace svos {
namespace data {

namespace audit {
namespace {
std::atomic<uint64_t> g_gt_reads{0};
}
uint64_t gt_mask_reads() { return g_gt_reads.load(); }
void reset_gt_mask_reads() { g_gt_reads.store(0); }
void count_gt_read() { g_gt_reads.fetch_add(1, std::memory_order_relaxed); }
}  // namespace audit

int VideoSequence::gt_object_count() const {
  int k = 0;
  for (const auto& m : gt_)
    for (uint8_t v : m.v) k = std::max(k, static_cast<int>(v));
  return k;
}

void VideoSequence::set_gt(std::vector<LabelMap> gt) {
  gt_ = std::move(gt);
  validate();
}

void VideoSequence::validate() const {
  for (const auto& f : frames) {
    if (f.rank() != 3 || f.dim(0) != 3) throw validation_error("video: frame is not (3,H,W)");
    if (f.dim(1) != height() || f.dim(2) != width())
      throw validation_error("video " + id + ": frames differ in size");
  }
  if (!gt_.empty()) {
    if (gt_.size() != frames.size())
      throw validation_error("video " + id + ": " + std::to_string(gt_.size()) + " masks for " +
                             std::to_string(frames.size()) + " frames");
    for (const auto& m : gt_)
      if (m.dim(0) != height() || m.dim(1) != width())
        throw validation_error("video " + id + ": mask/frame size mismatch");
  }
}

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", i);
  return buf;
}

// Indexed frames in a directory; enforces a gap-free 0..n-1 numbering.
std::vector<std::string> indexed_files(const std::string& dir) {
  std::set<int> seen;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    try {
      seen.insert(std::stoi(e.path().stem().string()));
    } catch (...) {
      throw validation_error("non-numeric frame name: " + e.path().string());
    }
  }
  if (seen.empty()) throw validation_error("no .png frames in " + dir);
  std::vector<std::string> out;
  int expect = 0;
  for (int idx : seen) {
    if (idx != expect)
      throw validation_error("missing frame index " + std::to_string(expect) + " in " + dir);
    out.push_back(dir + "/" + frame_name(idx));
    ++expect;
  }
  return out;
}

}  // namespace

void save_video(const VideoSequence& video, const std::string& root) {
  video.validate();
  fs::path base = fs::path(root) / video.id;
  fs::create_directories(base / "frames");
  for (int t = 0; t < video.length(); ++t)
    write_png_rgb((base / "frames" / frame_name(t)).string(), video.frames[static_cast<size_t>(t)]);
  if (video.has_gt()) {
    fs::create_directories(base / "masks");
    for (int t = 0; t < video.length(); ++t)
      write_png_labels((base / "masks" / frame_name(t)).string(), video.gt_mask(t));
  }
}

VideoSequence load_video(const std::string& video_dir, bool load_gt) {
  fs::path base(video_dir);
  if (!fs::is_directory(base / "frames"))
    throw validation_error("no frames/ directory under " + video_dir);
  VideoSequence v;
  v.id = base.filename().string();
  for (const auto& f : indexed_files((base / "frames").string()))
    v.frames.push_back(read_png_rgb(f));
  if (load_gt && fs::is_directory(base / "masks")) {
    std::vector<LabelMap> gt;
    for (const auto& f : indexed_files((base / "masks").string()))
      gt.push_back(read_png_labels(f));
    if (gt.size() != v.frames.size())
      throw validation_error(video_dir + ": mask count " + std::to_string(gt.size()) +
                             " != frame count " + std::to_string(v.frames.size()));
    v.set_gt(std::move(gt));
  }
  v.validate();
  return v;
}

std::vector<std::string> list_video_ids(const std::string& root) {
  if (!fs::is_directory(root)) throw validation_error("dataset root not found: " + root);
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::is_directory(e.path() / "frames"))
      ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace data
}  // namespace svos

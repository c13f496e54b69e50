#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "svos/error.hpp"
#include "svos/image.hpp"

namespace svos {
namespace data {

// Self-supervision audit: every ground-truth mask read goes through
// VideoSequence::gt_mask and bumps this counter. Training must leave it
// untouched; only evaluation and explicit test harnesses may read gt.
namespace audit {
uint64_t gt_mask_reads();
void reset_gt_mask_reads();
void count_gt_read();
}  // namespace audit

class VideoSequence {
 public:
  std::string id;
  std::vector<Image> frames;

  VideoSequence() = default;
  VideoSequence(std::string vid, std::vector<Image> f) : id(std::move(vid)), frames(std::move(f)) {}

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames[0].dim(1); }
  int width() const { return frames.empty() ? 0 : frames[0].dim(2); }

  bool has_gt() const { return !gt_.empty(); }

  const LabelMap& gt_mask(int t) const {
    audit::count_gt_read();
    return gt_.at(static_cast<size_t>(t));
  }

  // Highest object id present in the gt.
  int gt_object_count() const;

  void set_gt(std::vector<LabelMap> gt);
  void validate() const;

 private:
  std::vector<LabelMap> gt_;
};

// Directory layout: <root>/<video_id>/frames/%05d.png (8-bit RGB) and
// <root>/<video_id>/masks/%05d.png (8-bit single channel, value = object id).
// Training loads with load_gt=false so gt never even enters memory there.
void save_video(const VideoSequence& video, const std::string& root);
VideoSequence load_video(const std::string& video_dir, bool load_gt = true);
std::vector<std::string> list_video_ids(const std::string& root);

// Mask provider for clip sampling: pseudo labels during self-supervised
// training, or gt in the supervised sanity harness.
struct MaskSource {
  // label map for frame t of the bound video; throws when absent
  virtual LabelMap labels(int t) const = 0;
  virtual int object_count() const = 0;  // ids run 1..object_count()
  virtual ~MaskSource() = default;
};

struct GtMaskSource : MaskSource {
  const VideoSequence* video;
  explicit GtMaskSource(const VideoSequence& v) : video(&v) {}
  LabelMap labels(int t) const override { return video->gt_mask(t); }
  int object_count() const override { return video->gt_object_count(); }
};

}  // namespace data
}  // namespace svos

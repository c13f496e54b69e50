#pragma once

#include <string>
#include <vector>

#include "svos/metrics.hpp"

namespace svos {
namespace eval {

struct ObjectScore {
  std::string video;
  int object_id = 0;
  std::vector<double> j, f;  // per scored frame (offsets 1..T-1)
  double j_mean = 0, f_mean = 0;
};

struct EvalReport {
  std::vector<ObjectScore> objects;
  double j_mean = 0, f_mean = 0, jf_mean = 0;
  double j_recall = 0, f_recall = 0;  // fraction of objects above 0.5
  std::vector<double> frame_curve;    // mean J&F at frame offset i+1
};

// Scores predictions against ground truth. Frame 0 is the given mask and is
// not scored. gt_root uses the dataset layout (<root>/<vid>/masks/%05d.png);
// predictions live at <pred_root>/<vid>/%05d.png, falling back to the
// dataset layout so a dataset evaluates cleanly against itself.
EvalReport evaluate(const std::string& pred_root, const std::string& gt_root);

void write_report_csv(const EvalReport& r, const std::string& path);
void write_curve_csv(const EvalReport& r, const std::string& path);
void write_curve_svg(const EvalReport& r, const std::string& path);

}  // namespace eval
}  // namespace svos

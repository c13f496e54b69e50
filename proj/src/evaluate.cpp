#include "svos/evaluate.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "svos/error.hpp"
#include "svos/parallel.hpp"

namespace fs = std::filesystem;

namespace svos {
namespace eval {

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", i);
  return buf;
}

fs::path pred_dir_for(const std::string& pred_root, const std::string& vid) {
  fs::path direct = fs::path(pred_root) / vid;
  if (fs::exists(direct / frame_name(0))) return direct;
  return direct / "masks";
}

}  // namespace

EvalReport evaluate(const std::string& pred_root, const std::string& gt_root) {
  if (!fs::is_directory(gt_root)) throw validation_error("gt root not found: " + gt_root);

  std::vector<std::string> vids;
  for (const auto& e : fs::directory_iterator(gt_root))
    if (e.is_directory() && fs::is_directory(e.path() / "masks"))
      vids.push_back(e.path().filename().string());
  std::sort(vids.begin(), vids.end());
  if (vids.empty()) throw validation_error("no videos with masks under " + gt_root);

  // inventory check up front, reporting every missing item at once
  std::vector<std::string> missing;
  std::vector<int> lengths(vids.size(), 0);
  for (size_t v = 0; v < vids.size(); ++v) {
    fs::path gdir = fs::path(gt_root) / vids[v] / "masks";
    int t = 0;
    while (fs::exists(gdir / frame_name(t))) ++t;
    lengths[v] = t;
    fs::path pdir = pred_dir_for(pred_root, vids[v]);
    for (int i = 0; i < t; ++i)
      if (!fs::exists(pdir / frame_name(i)))
        missing.push_back(vids[v] + "/" + frame_name(i));
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size() && i < 20; ++i) list += "\n  " + missing[i];
    if (missing.size() > 20) list += "\n  ... " + std::to_string(missing.size() - 20) + " more";
    throw validation_error("prediction inventory mismatch, missing:" + list);
  }

  struct VideoScores {
    std::vector<ObjectScore> objects;
  };
  std::vector<VideoScores> per_video(vids.size());

  parallel_for(static_cast<int>(vids.size()), [&](int vi) {
    const std::string& vid = vids[static_cast<size_t>(vi)];
    fs::path gdir = fs::path(gt_root) / vid / "masks";
    fs::path pdir = pred_dir_for(pred_root, vid);
    const int T = lengths[static_cast<size_t>(vi)];

    std::vector<LabelMap> gt(static_cast<size_t>(T)), pred(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      gt[static_cast<size_t>(t)] = read_png_labels((gdir / frame_name(t)).string());
      pred[static_cast<size_t>(t)] = read_png_labels((pdir / frame_name(t)).string());
      if (pred[static_cast<size_t>(t)].shape != gt[static_cast<size_t>(t)].shape)
        throw validation_error(vid + "/" + frame_name(t) + ": prediction size mismatch");
    }

    std::set<int> ids;
    for (const auto& m : gt)
      for (uint8_t x : m.v)
        if (x) ids.insert(x);

    int tol = default_boundary_tolerance(gt[0].dim(0), gt[0].dim(1));
    for (int id : ids) {
      ObjectScore os;
      os.video = vid;
      os.object_id = id;
      for (int t = 1; t < T; ++t) {
        os.j.push_back(region_similarity(pred[static_cast<size_t>(t)], gt[static_cast<size_t>(t)], id));
        os.f.push_back(contour_accuracy(pred[static_cast<size_t>(t)], gt[static_cast<size_t>(t)], id, tol));
      }
      if (os.j.empty()) continue;
      double js = 0, fsum = 0;
      for (double x : os.j) js += x;
      for (double x : os.f) fsum += x;
      os.j_mean = js / os.j.size();
      os.f_mean = fsum / os.f.size();
      per_video[static_cast<size_t>(vi)].objects.push_back(std::move(os));
    }
  });

  EvalReport r;
  for (auto& vs : per_video)
    for (auto& os : vs.objects) r.objects.push_back(std::move(os));
  if (r.objects.empty()) throw validation_error("no scoreable objects found");

  size_t max_len = 0;
  int jr = 0, fr = 0;
  for (const auto& os : r.objects) {
    r.j_mean += os.j_mean;
    r.f_mean += os.f_mean;
    jr += os.j_mean > 0.5 ? 1 : 0;
    fr += os.f_mean > 0.5 ? 1 : 0;
    max_len = std::max(max_len, os.j.size());
  }
  r.j_mean /= static_cast<double>(r.objects.size());
  r.f_mean /= static_cast<double>(r.objects.size());
  r.jf_mean = (r.j_mean + r.f_mean) / 2.0;
  r.j_recall = static_cast<double>(jr) / static_cast<double>(r.objects.size());
  r.f_recall = static_cast<double>(fr) / static_cast<double>(r.objects.size());

  r.frame_curve.assign(max_len, 0.0);
  for (size_t i = 0; i < max_len; ++i) {
    double acc = 0;
    int n = 0;
    for (const auto& os : r.objects)
      if (i < os.j.size()) {
        acc += (os.j[i] + os.f[i]) / 2.0;
        ++n;
      }
    r.frame_curve[i] = n ? acc / n : 0.0;
  }
  return r;
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot write " + path);
  f << "video,object,J_mean,F_mean,JF_mean\n";
  for (const auto& os : r.objects)
    f << os.video << "," << os.object_id << "," << os.j_mean << "," << os.f_mean << ","
      << (os.j_mean + os.f_mean) / 2 << "\n";
  f << "ALL,-," << r.j_mean << "," << r.f_mean << "," << r.jf_mean << "\n";
  f << "RECALL,-," << r.j_recall << "," << r.f_recall << ",-\n";
}

void write_curve_csv(const EvalReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot write " + path);
  f << "frame_offset,JF_mean\n";
  for (size_t i = 0; i < r.frame_curve.size(); ++i)
    f << (i + 1) << "," << r.frame_curve[i] << "\n";
}

void write_curve_svg(const EvalReport& r, const std::string& path) {
  const int w = 640, h = 360, ml = 50, mb = 40, mt = 20, mr = 20;
  const int pw = w - ml - mr, ph = h - mt - mb;
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<rect width='" << w << "' height='" << h << "' fill='white'/>\n";
  s << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
    << "' stroke='black'/>\n";
  s << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
    << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    double v = i / 5.0;
    int y = mt + ph - static_cast<int>(v * ph);
    s << "<text x='" << ml - 38 << "' y='" << y + 4 << "' font-size='11'>" << v << "</text>\n";
    s << "<line x1='" << ml - 4 << "' y1='" << y << "' x2='" << ml << "' y2='" << y
      << "' stroke='black'/>\n";
  }
  size_t n = r.frame_curve.size();
  if (n > 0) {
    s << "<polyline fill='none' stroke='#c0392b' stroke-width='1.5' points='";
    for (size_t i = 0; i < n; ++i) {
      double x = ml + (n == 1 ? 0.0 : static_cast<double>(i) / (n - 1) * pw);
      double y = mt + ph - r.frame_curve[i] * ph;
      s << x << "," << y << " ";
    }
    s << "'/>\n";
  }
  s << "<text x='" << ml + pw / 2 - 60 << "' y='" << h - 8
    << "' font-size='12'>frame offset from start</text>\n";
  s << "<text x='14' y='" << mt + ph / 2
    << "' font-size='12' transform='rotate(-90 14 " << mt + ph / 2 << ")'>mean J&amp;F</text>\n";
  s << "</svg>\n";
  std::ofstream f(path);
  if (!f) throw io_error("cannot write " + path);
  f << s.str();
}

}  // namespace eval
}  // namespace svos

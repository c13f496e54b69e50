#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "svos/evaluate.hpp"
#include "svos/parallel.hpp"
#include "svos/propagate.hpp"
#include "svos/synthetic.hpp"
#include "svos/trainer.hpp"

namespace fs = std::filesystem;
using namespace svos;

namespace {

void print_config(const std::string& title, const std::map<std::string, std::string>& kv) {
  std::cout << "# effective config (" << title << ")\n";
  for (const auto& [k, v] : kv) std::cout << k << "=" << v << "\n";
}

void write_config(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& out, int videos, int frames, int size, int objects,
                 uint64_t seed, const std::string& spec_file, bool force) {
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw validation_error("output directory " + out + " exists; pass --force to overwrite");
  fs::create_directories(out);

  data::SceneSpec base;
  if (!spec_file.empty()) {
    std::ifstream f(spec_file);
    if (!f) throw validation_error("cannot read scene spec " + spec_file);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    base = data::SceneSpec::from_text(text);
  } else {
    base.height = size;
    base.width = size;
    base.frames = frames;
  }

  std::map<std::string, std::string> kv{{"out", out},
                                        {"videos", std::to_string(videos)},
                                        {"frames", std::to_string(base.frames)},
                                        {"size", std::to_string(base.height)},
                                        {"objects", std::to_string(objects)},
                                        {"seed", std::to_string(seed)},
                                        {"spec", spec_file.empty() ? "<default>" : spec_file}};
  print_config("gen-data", kv);

  std::ofstream manifest(fs::path(out) / "manifest.txt");
  manifest << "# id seed objects frames height width\n";
  for (int i = 0; i < videos; ++i) {
    data::SceneSpec spec = base;
    // vary object count across the corpus unless pinned
    spec.num_objects = objects > 0 ? objects : 2 + (i % 2);
    spec.background_seed = seed * 7919u + static_cast<uint64_t>(i);
    char id[32];
    std::snprintf(id, sizeof(id), "video_%03d", i);
    uint64_t vseed = seed * 1000003u + static_cast<uint64_t>(i) * 97u;
    data::VideoSequence v = data::generate_synthetic_video(spec, vseed, id);
    data::save_video(v, out);
    manifest << id << " " << vseed << " " << spec.num_objects << " " << spec.frames << " "
             << spec.height << " " << spec.width << "\n";
  }
  write_config((fs::path(out) / "gen_config.txt").string(), kv);
  std::cout << "wrote " << videos << " videos under " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& data_root, const std::string& out,
              const std::string& config_file,
              const std::vector<std::pair<std::string, std::string>>& overrides, bool resume) {
  train::TrainConfig cfg;
  if (!config_file.empty()) {
    std::ifstream f(config_file);
    if (!f) throw validation_error("cannot read config " + config_file);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    cfg = train::TrainConfig::from_text(text);
  }
  for (const auto& [k, v] : overrides) cfg.set(k, v);  // flags win
  cfg.validate();

  std::cout << "# effective config (train)\n" << cfg.to_text();
  train::TrainResult res = train::train(cfg, data_root, out, resume);
  std::cout << "final checkpoint: " << res.checkpoint_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void infer_dataset(const net::ModelParams& params, const std::string& data_root,
                   const std::string& out, const infer::InferConfig& icfg, bool dump_probs) {
  auto ids = data::list_video_ids(data_root);
  if (ids.empty()) throw validation_error("no videos under " + data_root);
  parallel_for(static_cast<int>(ids.size()), [&](int i) {
    const std::string& vid = ids[static_cast<size_t>(i)];
    data::VideoSequence video =
        data::load_video((fs::path(data_root) / vid).string(), /*load_gt=*/false);
    fs::path first = fs::path(data_root) / vid / "masks" / "00000.png";
    if (!fs::exists(first)) throw validation_error("no first-frame mask at " + first.string());
    LabelMap fm = read_png_labels(first.string());
    int k = 0;
    for (uint8_t v : fm.v) k = std::max(k, static_cast<int>(v));
    MaskSet first_mask = one_hot_masks(fm, k);
    auto masks = infer::infer_video(params, video, first_mask, icfg);
    infer::write_predictions(masks, out, vid, dump_probs);
  });
}

int cmd_infer(const std::string& data_root, const std::string& ckpt, const std::string& out,
              int window, const std::string& rounds, const std::string& mode, bool dump_probs) {
  if (!fs::exists(ckpt)) throw validation_error("checkpoint not found: " + ckpt);
  net::ModelParams params = net::load_checkpoint(ckpt);

  infer::InferConfig icfg;
  icfg.window = window;
  if (mode == "refine") icfg.mode = infer::InferConfig::Mode::Refine;
  else if (mode == "warp") icfg.mode = infer::InferConfig::Mode::Warp;
  else if (mode == "copy") icfg.mode = infer::InferConfig::Mode::Copy;
  else throw validation_error("unknown mode '" + mode + "' (refine|warp|copy)");

  std::map<std::string, std::string> kv{{"data", data_root}, {"ckpt", ckpt},
                                        {"out", out},        {"window", std::to_string(window)},
                                        {"rounds", rounds},  {"mode", mode}};
  print_config("infer", kv);

  auto dotdot = rounds.find("..");
  if (dotdot != std::string::npos) {
    int lo = std::stoi(rounds.substr(0, dotdot));
    int hi = std::stoi(rounds.substr(dotdot + 2));
    if (lo < 0 || hi < lo) throw validation_error("bad rounds range " + rounds);
    for (int r = lo; r <= hi; ++r) {
      icfg.rounds = r;
      infer_dataset(params, data_root, (fs::path(out) / ("rounds_" + std::to_string(r))).string(),
                    icfg, dump_probs);
      std::cout << "rounds=" << r << " done\n";
    }
  } else {
    icfg.rounds = std::stoi(rounds);
    if (icfg.rounds < 0) throw validation_error("rounds must be >= 0");
    infer_dataset(params, data_root, out, icfg, dump_probs);
  }
  fs::create_directories(out);
  write_config((fs::path(out) / "infer_config.txt").string(), kv);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out) {
  eval::EvalReport r = eval::evaluate(pred, gt);
  fs::create_directories(out);
  eval::write_report_csv(r, (fs::path(out) / "report.csv").string());
  eval::write_curve_csv(r, (fs::path(out) / "curve.csv").string());
  eval::write_curve_svg(r, (fs::path(out) / "curve.svg").string());
  std::cout << "J_m=" << r.j_mean << " F_m=" << r.f_mean << " J&F_m=" << r.jf_mean
            << " J_recall=" << r.j_recall << " F_recall=" << r.f_recall << "\n";
  std::cout << "report under " << out << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  struct Row {
    std::string name;
    double j = 0, f = 0, jf = 0, jr = 0, fr = 0;
  };
  std::vector<Row> rows;
  for (const auto& in : inputs) {
    fs::path csv = fs::is_directory(in) ? fs::path(in) / "report.csv" : fs::path(in);
    std::ifstream f(csv);
    if (!f) throw validation_error("cannot read eval report " + csv.string());
    Row row;
    row.name = fs::is_directory(in) ? fs::path(in).filename().string() : csv.stem().string();
    std::string line;
    while (std::getline(f, line)) {
      if (line.rfind("ALL,", 0) == 0) {
        std::sscanf(line.c_str(), "ALL,-,%lf,%lf,%lf", &row.j, &row.f, &row.jf);
      } else if (line.rfind("RECALL,", 0) == 0) {
        std::sscanf(line.c_str(), "RECALL,-,%lf,%lf", &row.jr, &row.fr);
      }
    }
    rows.push_back(row);
  }
  std::cout << "run,J_m,F_m,J&F_m,J_recall,F_recall\n";
  for (const auto& r : rows)
    std::cout << r.name << "," << r.j << "," << r.f << "," << r.jf << "," << r.jr << "," << r.fr
              << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    f << "run,J_m,F_m,JF_m,J_recall,F_recall\n";
    for (const auto& r : rows)
      f << r.name << "," << r.j << "," << r.f << "," << r.jf << "," << r.jr << "," << r.fr << "\n";
    std::cout << "combined report written to " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised video object segmentation pipeline"};
  app.require_subcommand(1);

  // gen-data ------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic video corpus");
  std::string gen_out, gen_spec;
  int gen_videos = 20, gen_frames = 24, gen_size = 64, gen_objects = 0;
  uint64_t gen_seed = 1;
  bool gen_force = false;
  gen->add_option("--out", gen_out, "output dataset root")->required();
  gen->add_option("--videos", gen_videos, "number of videos (default 20)");
  gen->add_option("--frames", gen_frames, "frames per video (default 24)");
  gen->add_option("--size", gen_size, "canvas side in pixels (default 64)");
  gen->add_option("--objects", gen_objects, "objects per video; 0 alternates 2 and 3");
  gen->add_option("--seed", gen_seed, "corpus seed (default 1)");
  gen->add_option("--spec", gen_spec, "scene spec file (key=value)");
  gen->add_flag("--force", gen_force, "overwrite an existing corpus");

  // train ---------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "two-stage self-supervised training");
  std::string tr_data, tr_out, tr_config;
  bool tr_resume = false;
  tr->add_option("--data", tr_data, "dataset root")->required();
  tr->add_option("--out", tr_out, "run directory for checkpoints and curves")->required();
  tr->add_option("--config", tr_config, "training config file (key=value)");
  tr->add_flag("--resume", tr_resume, "resume from the run directory's last checkpoint");
  std::map<std::string, std::string> tr_flags;
  for (const std::string key :
       {"lambda1", "lambda2", "stage1_epochs", "stage2_epochs", "recluster_period", "stage1_lr",
        "stage2_lr", "lr_decay_every", "lr_decay_factor", "batch_size", "n_refs", "n_frames",
        "clips_per_video", "m_clusters", "temperature", "pe_weight", "pe_dims",
        "prune_threshold", "seed", "train_size", "augment", "aug_scale_min", "aug_scale_max",
        "aug_crop_area_min", "arch"}) {
    tr_flags[key] = "";
    std::string flag = "--" + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    tr->add_option(flag, tr_flags[key], "override config key " + key);
  }

  // infer ---------------------------------------------------------------
  auto* inf = app.add_subcommand("infer", "propagate first-frame masks through videos");
  std::string inf_data, inf_ckpt, inf_out, inf_rounds = "3", inf_mode = "refine";
  int inf_window = 20;
  bool inf_probs = false;
  inf->add_option("--data", inf_data, "dataset root (frames + first-frame masks)")->required();
  inf->add_option("--ckpt", inf_ckpt, "model checkpoint")->required();
  inf->add_option("--out", inf_out, "prediction output root")->required();
  inf->add_option("--window", inf_window, "reference window W (default 20)");
  inf->add_option("--rounds", inf_rounds, "refinement rounds R, or a sweep like 0..5");
  inf->add_option("--mode", inf_mode, "refine | warp | copy (default refine)");
  inf->add_flag("--dump-probs", inf_probs, "also dump raw probabilities per video");

  // eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_out = "eval_out";
  ev->add_option("--pred", ev_pred, "prediction root")->required();
  ev->add_option("--gt", ev_gt, "dataset root with gt masks")->required();
  ev->add_option("--out", ev_out, "report output directory");

  // report --------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "combine eval outputs into one table");
  std::vector<std::string> rep_in;
  std::string rep_out;
  rep->add_option("--in", rep_in, "eval output directories or report.csv files")
      ->required()
      ->expected(-1);
  rep->add_option("--out", rep_out, "combined CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_out, gen_videos, gen_frames, gen_size, gen_objects, gen_seed,
                          gen_spec, gen_force);
    if (tr->parsed()) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& [k, v] : tr_flags)
        if (!v.empty()) overrides.emplace_back(k, v);
      return cmd_train(tr_data, tr_out, tr_config, overrides, tr_resume);
    }
    if (inf->parsed())
      return cmd_infer(inf_data, inf_ckpt, inf_out, inf_window, inf_rounds, inf_mode, inf_probs);
    if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_out);
    if (rep->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

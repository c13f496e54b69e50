#include "svos/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "svos/parallel.hpp"

namespace fs = std::filesystem;

namespace svos {
namespace train {

double total_loss(double l_seg, double l_short, double l_long, double lambda1, double lambda2) {
  if (!std::isfinite(l_seg)) throw validation_error("total_loss: L_Seg is not finite");
  if (!std::isfinite(l_short)) throw validation_error("total_loss: L_Short is not finite");
  if (!std::isfinite(l_long)) throw validation_error("total_loss: L_Long is not finite");
  return l_seg + lambda1 * l_short + lambda2 * l_long;
}

ClipLossPlan sample_plan(const TrainConfig& cfg, bool with_seg, int grid_h, int grid_w, Rng& rng) {
  ClipLossPlan plan;
  plan.with_seg = with_seg;
  plan.lambda1 = cfg.lambda1;
  plan.lambda2 = cfg.lambda2;
  plan.temperature = cfg.temperature;
  auto sample_phi = [&](corr::TransformParams& phi) {
    phi.flip = rng.bernoulli(0.5);
    // integer-cell crop keeping at least ~3/4 of each side
    int ch = std::max(2, grid_h - rng.uniform_int(0, grid_h / 4));
    int cw = std::max(2, grid_w - rng.uniform_int(0, grid_w / 4));
    phi.has_crop = true;
    phi.crop_h = ch;
    phi.crop_w = cw;
    phi.crop_y0 = rng.uniform_int(0, grid_h - ch);
    phi.crop_x0 = rng.uniform_int(0, grid_w - cw);
  };
  sample_phi(plan.phi_short);
  sample_phi(plan.phi_long);
  return plan;
}

LossTerms clip_loss_and_grads(const net::ModelParams& params, const data::Clip& clip,
                              const ClipLossPlan& plan, GradMap* grads) {
  Tape<float> tp;
  auto bind = net::bind_params(tp, params, grads != nullptr);
  auto nodes = build_clip_loss(tp, bind, params.arch, clip, plan);

  LossTerms terms;
  terms.short_term = tp.val(nodes.short_term)[0];
  terms.long_term = tp.val(nodes.long_term)[0];
  if (nodes.seg >= 0) {
    terms.seg = tp.val(nodes.seg)[0];
    terms.has_seg = true;
  }
  terms.total = total_loss(terms.has_seg ? terms.seg : 0.0, terms.short_term, terms.long_term,
                           plan.lambda1, plan.lambda2);

  if (grads) {
    tp.backward(nodes.total);
    for (const auto& [name, id] : bind.ids) {
      if (tp.has_grad(id))
        (*grads)[name] = tp.grad(id);
      else
        (*grads)[name] = Tensor<float>(tp.val(id).shape);
    }
  }
  return terms;
}

void Adam::step(net::ModelParams& params, const GradMap& grads, double lr) {
  ++steps;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (auto& [name, w] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor<float>& g = git->second;
    Tensor<float>& mm = m[name];
    Tensor<float>& vv = v[name];
    if (mm.numel() == 0) mm = Tensor<float>(w.shape);
    if (vv.numel() == 0) vv = Tensor<float>(w.shape);
    for (int i = 0; i < w.numel(); ++i) {
      double gi = g[i];
      if (!std::isfinite(gi)) throw validation_error("adam: non-finite gradient in " + name);
      mm[i] = static_cast<float>(beta1 * mm[i] + (1 - beta1) * gi);
      vv[i] = static_cast<float>(beta2 * vv[i] + (1 - beta2) * gi * gi);
      double mhat = mm[i] / c1, vhat = vv[i] / c2;
      w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

std::vector<cluster::PseudoMaskSet> update_pseudo_labels(
    const net::ModelParams& params, const std::vector<data::VideoSequence>& videos,
    const TrainConfig& cfg, int epoch_tag, const std::string& dataset_root,
    const std::vector<cluster::PseudoMaskSet>* previous) {
  std::vector<cluster::PseudoMaskSet> out(videos.size());
  parallel_for(static_cast<int>(videos.size()), [&](int vi) {
    const auto& video = videos[static_cast<size_t>(vi)];
    try {
      cluster::VideoGrid grid;
      cluster::ClusterState st =
          cluster::cluster_video(video, params, cfg.m_clusters, static_cast<float>(cfg.pe_weight),
                                 cfg.pe_dims, cfg.seed ^ (0x5eedu + static_cast<uint64_t>(vi)),
                                 &grid);
      cluster::PseudoMaskSet set =
          derive_pseudo_masks(st, grid, static_cast<float>(cfg.prune_threshold));
      set.epoch = epoch_tag;
      out[static_cast<size_t>(vi)] = std::move(set);
    } catch (const std::exception& e) {
      std::cerr << "warning: clustering failed for " << video.id << ": " << e.what()
                << (previous ? " (keeping previous masks)" : " (video skipped)") << "\n";
      if (previous)
        out[static_cast<size_t>(vi)] = (*previous)[static_cast<size_t>(vi)];
      else
        out[static_cast<size_t>(vi)].empty = true;
    }
  });
  if (!dataset_root.empty())
    for (size_t vi = 0; vi < videos.size(); ++vi)
      save_pseudo_masks(out[vi], dataset_root, videos[vi].id);
  return out;
}

namespace {

struct OptimizerState {
  Adam adam;
  int epoch = 0;

  void save(const std::string& path, const net::ArchDescriptor& arch) const {
    net::ModelParams blob;
    blob.arch = arch;
    for (const auto& [k, t] : adam.m) blob.tensors["m." + k] = t;
    for (const auto& [k, t] : adam.v) blob.tensors["v." + k] = t;
    Tensor<float> meta({3});
    meta[0] = static_cast<float>(epoch);
    meta[1] = static_cast<float>(adam.steps);
    meta[2] = 0;
    blob.tensors["meta"] = meta;
    net::save_checkpoint(blob, path);
  }

  static OptimizerState load(const std::string& path) {
    net::ModelParams blob = net::load_checkpoint(path);
    OptimizerState st;
    for (const auto& [k, t] : blob.tensors) {
      if (k == "meta") {
        st.epoch = static_cast<int>(t[0]);
        st.adam.steps = static_cast<int64_t>(t[1]);
      } else if (k.rfind("m.", 0) == 0) {
        st.adam.m[k.substr(2)] = t;
      } else if (k.rfind("v.", 0) == 0) {
        st.adam.v[k.substr(2)] = t;
      }
    }
    return st;
  }
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& dataset_root,
                  const std::string& out_dir, bool resume) {
  cfg.validate();
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "config.txt");
    f << cfg.to_text();
  }

  auto ids = data::list_video_ids(dataset_root);
  if (ids.empty()) throw validation_error("train: empty dataset at " + dataset_root);
  std::vector<data::VideoSequence> videos;
  for (const auto& id : ids)
    videos.push_back(data::load_video((fs::path(dataset_root) / id).string(), /*load_gt=*/false));

  const net::ArchDescriptor arch = cfg.descriptor();
  net::ModelParams params;
  Adam adam;
  int start_epoch = 0;

  const std::string state_ckpt = (fs::path(out_dir) / "state.ckpt").string();
  const std::string state_opt = (fs::path(out_dir) / "state.opt").string();
  const std::string curve_path = (fs::path(out_dir) / "loss_curve.csv").string();

  if (resume && fs::exists(state_ckpt) && fs::exists(state_opt)) {
    params = net::load_checkpoint(state_ckpt, arch);
    OptimizerState st = OptimizerState::load(state_opt);
    adam = std::move(st.adam);
    start_epoch = st.epoch;
    std::cout << "resuming from epoch " << start_epoch << "\n";
  } else {
    params = net::init_parameters(arch, cfg.seed);
    std::ofstream f(curve_path);
    f << "epoch,L_Seg,L_Short,L_Long,total\n";
  }

  const int total_epochs = cfg.stage1_epochs + cfg.stage2_epochs;
  const int stride = arch.stride();
  Rng root(cfg.seed);

  std::vector<cluster::PseudoMaskSet> pseudo(videos.size());
  bool have_pseudo = false;
  auto ensure_pseudo = [&](int tag, bool refresh) {
    pseudo = update_pseudo_labels(params, videos, cfg, tag, dataset_root,
                                  refresh && have_pseudo ? &pseudo : nullptr);
    have_pseudo = true;
    int usable = 0;
    for (const auto& s : pseudo) usable += s.empty ? 0 : 1;
    if (usable == 0)
      throw std::runtime_error(
          "train: every video clustered to nothing but over-size clusters; "
          "no pseudo masks to learn from");
    std::cout << "pseudo masks at epoch " << tag << ": " << usable << "/" << videos.size()
              << " videos usable\n";
  };

  // when resuming into stage 2, pick up the newest persisted pseudo set
  if (start_epoch >= cfg.stage1_epochs && cfg.stage2_epochs > 0 && start_epoch < total_epochs) {
    bool any = false;
    for (size_t vi = 0; vi < videos.size(); ++vi) {
      auto epochs = cluster::list_pseudo_epochs(dataset_root, videos[vi].id);
      int best = -1;
      for (int e : epochs)
        if (e <= start_epoch) best = std::max(best, e);
      if (best >= 0) {
        pseudo[vi] = cluster::load_pseudo_masks(dataset_root, videos[vi].id, best);
        any = true;
      }
    }
    have_pseudo = any;
    if (!any) ensure_pseudo(start_epoch, false);
  }

  TrainResult result;
  std::ofstream curve(curve_path, std::ios::app);

  for (int epoch = start_epoch + 1; epoch <= total_epochs; ++epoch) {
    const bool stage2 = epoch > cfg.stage1_epochs;
    const int e2 = epoch - cfg.stage1_epochs;  // 1-based stage-2 index

    if (stage2 && e2 == 1) {
      adam.reset();  // fresh moments at the stage boundary
      ensure_pseudo(cfg.stage1_epochs, false);
    } else if (stage2 && (e2 - 1) % cfg.recluster_period == 0 && e2 > 1) {
      ensure_pseudo(epoch - 1, true);
    }

    double lr = stage2 ? cfg.stage2_lr
                       : cfg.stage1_lr *
                             std::pow(cfg.lr_decay_factor, (epoch - 1) / cfg.lr_decay_every);

    // one job per (video, clip slot), shuffled
    struct Job {
      int video;
      uint64_t stream;
    };
    std::vector<Job> jobs;
    for (int vi = 0; vi < static_cast<int>(videos.size()); ++vi)
      for (int ci = 0; ci < cfg.clips_per_video; ++ci)
        jobs.push_back({vi, static_cast<uint64_t>(epoch) * 1000003u +
                                static_cast<uint64_t>(vi) * 131u + static_cast<uint64_t>(ci)});
    Rng shuffle_rng = root.fork(777000 + static_cast<uint64_t>(epoch));
    for (size_t i = jobs.size(); i > 1; --i)
      std::swap(jobs[i - 1], jobs[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);

    LossTerms epoch_mean;
    int epoch_clips = 0, epoch_seg_clips = 0;

    for (size_t batch_lo = 0; batch_lo < jobs.size(); batch_lo += static_cast<size_t>(cfg.batch_size)) {
      size_t batch_hi = std::min(jobs.size(), batch_lo + static_cast<size_t>(cfg.batch_size));
      const int bsz = static_cast<int>(batch_hi - batch_lo);
      std::vector<GradMap> grads(static_cast<size_t>(bsz));
      std::vector<LossTerms> terms(static_cast<size_t>(bsz));

      parallel_for(bsz, [&](int bi) {
        const Job& job = jobs[batch_lo + static_cast<size_t>(bi)];
        const auto& video = videos[static_cast<size_t>(job.video)];
        Rng rng = root.fork(job.stream);

        const bool seg_ok = stage2 && have_pseudo && !pseudo[static_cast<size_t>(job.video)].empty;
        PseudoMaskSource source(pseudo[static_cast<size_t>(job.video)]);
        data::Clip clip = data::sample_training_clip(video, seg_ok ? &source : nullptr,
                                                     cfg.n_frames, cfg.n_refs, rng);
        if (cfg.augment) {
          data::AugmentConfig ac;
          ac.scale_min = cfg.aug_scale_min;
          ac.scale_max = cfg.aug_scale_max;
          ac.crop_area_min = cfg.aug_crop_area_min;
          ac.out_h = cfg.train_size;
          ac.out_w = cfg.train_size;
          clip = data::augment(clip, data::sample_augment_params(ac, video.height(),
                                                                 video.width(), rng));
        }
        ClipLossPlan plan = sample_plan(cfg, seg_ok, cfg.train_size / stride,
                                        cfg.train_size / stride, rng);
        terms[static_cast<size_t>(bi)] =
            clip_loss_and_grads(params, clip, plan, &grads[static_cast<size_t>(bi)]);
      });

      // deterministic slot-order reduction, then mean
      GradMap sum = std::move(grads[0]);
      for (int bi = 1; bi < bsz; ++bi)
        for (auto& [name, g] : sum) {
          const Tensor<float>& o = grads[static_cast<size_t>(bi)].at(name);
          for (int i = 0; i < g.numel(); ++i) g[i] += o[i];
        }
      if (bsz > 1)
        for (auto& [name, g] : sum)
          for (int i = 0; i < g.numel(); ++i) g[i] /= static_cast<float>(bsz);
      adam.step(params, sum, lr);

      for (int bi = 0; bi < bsz; ++bi) {
        epoch_mean.seg += terms[static_cast<size_t>(bi)].seg;
        epoch_mean.short_term += terms[static_cast<size_t>(bi)].short_term;
        epoch_mean.long_term += terms[static_cast<size_t>(bi)].long_term;
        epoch_mean.total += terms[static_cast<size_t>(bi)].total;
        epoch_seg_clips += terms[static_cast<size_t>(bi)].has_seg ? 1 : 0;
        ++epoch_clips;
      }
    }

    epoch_mean.seg = epoch_seg_clips ? epoch_mean.seg / epoch_seg_clips : 0.0;
    epoch_mean.short_term /= epoch_clips;
    epoch_mean.long_term /= epoch_clips;
    epoch_mean.total /= epoch_clips;
    epoch_mean.has_seg = epoch_seg_clips > 0;
    result.curve.push_back(epoch_mean);

    curve << epoch << "," << epoch_mean.seg << "," << epoch_mean.short_term << ","
          << epoch_mean.long_term << "," << epoch_mean.total << "\n";
    curve.flush();
    std::cout << "epoch " << epoch << "/" << total_epochs << (stage2 ? " [stage2]" : " [stage1]")
              << " lr=" << lr << " L_Seg=" << epoch_mean.seg
              << " L_Short=" << epoch_mean.short_term << " L_Long=" << epoch_mean.long_term
              << " total=" << epoch_mean.total << "\n";

    net::save_checkpoint(params, state_ckpt);
    OptimizerState st;
    st.adam = adam;
    st.epoch = epoch;
    st.save(state_opt, arch);
    if (epoch == cfg.stage1_epochs)
      net::save_checkpoint(params, (fs::path(out_dir) / "stage1.ckpt").string());
  }

  result.params = params;
  result.checkpoint_path = (fs::path(out_dir) / "final.ckpt").string();
  net::save_checkpoint(params, result.checkpoint_path);
  return result;
}

}  // namespace train
}  // namespace svos

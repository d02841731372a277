#include "flexhdr/train.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include "flexhdr/dataset.hpp"
#include "flexhdr/radiometry.hpp"

namespace flexhdr {

namespace {

// splitmix64: stateless seed derivation for (seed, step, slot, tag).
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
  return mix(mix(mix(seed ^ 0xf1ea5eedull) + a) + (b << 1) + tag);
}

// The four bracket subsets of the randomized-frame-count regime:
// {M}, {S, M}, {M, L}, {S, M, L}.
void any_pattern(std::uint64_t r, std::vector<float>& evs, int& ref) {
  switch (r % 4) {
    case 0: evs = {0.0f}; ref = 0; break;
    case 1: evs = {-2.0f, 0.0f}; ref = 1; break;
    case 2: evs = {0.0f, 2.0f}; ref = 0; break;
    default: evs = {-2.0f, 0.0f, 2.0f}; ref = 1; break;
  }
}

struct SampleResult {
  LossReport loss;
  std::map<std::string, Tensor<float>> grads;
};

SampleResult run_sample(const ModelState<float>& state, const ModelConfig& mc, const Scene& scene,
                        bool photometric_only) {
  Tape<float> tape;
  ParamVars<float> P(tape, state);
  const auto inputs = make_set_inputs<float>(scene.frame_set);
  ForwardResult<float> fr = forward_hdr(tape, P, mc, inputs, scene.frame_set.reference_index);

  SampleResult out;
  if (photometric_only) {
    const VarId lp = loss_photometric(tape, fr);
    out.loss.l_phot = tape.value(lp)[0];
    out.loss.l_total = out.loss.l_phot;
    tape.backward(lp);
  } else {
    const float norm = percentile(scene.ground_truth.radiance, 99.0f);
    LossVars<float> lv = build_losses(tape, fr, scene.ground_truth.radiance, norm);
    out.loss = report_losses(tape, lv);
    tape.backward(lv.l_total);
  }
  out.grads = tape.named_grads();
  return out;
}

bool losses_finite(const LossReport& r) {
  return std::isfinite(r.l_tm) && std::isfinite(r.l_phot) && std::isfinite(r.l_vgg) &&
         std::isfinite(r.l_total);
}

bool wants(const std::vector<std::string>& prefixes, const std::string& name) {
  if (prefixes.empty()) return true;
  for (const std::string& p : prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

}  // namespace

std::vector<float> ev_bracket(int n_frames) {
  switch (n_frames) {
    case 1: return {0.0f};
    case 2: return {-2.0f, 0.0f};
    case 3: return {-2.0f, 0.0f, 2.0f};
    case 4: return {-3.0f, -1.0f, 1.0f, 3.0f};
    default: throw ConfigError("unsupported frame count " + std::to_string(n_frames));
  }
}

int ev_reference(int n_frames) { return n_frames == 1 ? 0 : 1; }

Scene make_training_scene(const TrainConfig& cfg, int step, int slot) {
  SyntheticOptions opt;
  opt.size = cfg.scene_size;
  opt.motion = cfg.motion;
  opt.noise_sigma = cfg.noise_sigma;
  const std::uint64_t su = static_cast<std::uint64_t>(step);
  const std::uint64_t sl = static_cast<std::uint64_t>(slot);
  if (cfg.frames == FramesPolicy::Any) {
    int ref = 0;
    any_pattern(derive(cfg.seed, su, sl, 1), opt.ev_list, ref);
    opt.reference = ref;
  } else {
    opt.ev_list = ev_bracket(cfg.frames_fixed);
    opt.reference = ev_reference(cfg.frames_fixed);
  }
  Scene scene = make_synthetic_scene(derive(cfg.seed, su, sl, 2), opt);
  if (!cfg.augment_data) return scene;
  AugmentOptions aug;
  aug.crop = cfg.crop;
  return augment(scene, derive(cfg.seed, su, sl, 3), aug);
}

InferenceOutputs infer(const ModelState<float>& state, const ModelConfig& cfg, const FrameSet& fs) {
  fs.validate();
  Tape<float> tape;
  ParamVars<float> P(tape, state);
  const auto inputs = make_set_inputs<float>(fs);
  ForwardResult<float> fr = forward_hdr(tape, P, cfg, inputs, fs.reference_index);

  InferenceOutputs out;
  out.hdr.radiance = tape.value(fr.hdr);
  if (!out.hdr.radiance.all_finite()) throw NumericError("inference produced non-finite radiance");
  for (size_t i = 0; i < fr.confidence.size(); ++i) {
    out.confidence.push_back(tape.value(fr.confidence[i]));
    if (fr.attention[i] >= 0) {
      const Tensor<float>& a = tape.value(fr.attention[i]);
      Tensor<float> m(Shape::hwc(a.h(), a.w(), 1));
      for (int y = 0; y < a.h(); ++y)
        for (int x = 0; x < a.w(); ++x) {
          float s = 0.0f;
          for (int c = 0; c < a.c(); ++c) s += a.at(y, x, c);
          m.at(y, x, 0) = s / static_cast<float>(a.c());
        }
      out.attention.push_back(std::move(m));
    } else {
      out.attention.emplace_back();
    }
    out.flows.push_back(fr.flows[i] >= 0 ? tape.value(fr.flows[i]) : Tensor<float>());
  }
  return out;
}

ScenePsnr evaluate_scene(const ModelState<float>& state, const ModelConfig& cfg, const Scene& scene) {
  if (!scene.has_ground_truth()) throw DataError("evaluate: scene has no ground truth");
  InferenceOutputs out = infer(state, cfg, scene.frame_set);
  const float norm = percentile(scene.ground_truth.radiance, 99.0f);
  const Tensor<float> pred = normalize_by_percentile(out.hdr.radiance, norm);
  const Tensor<float> gt = normalize_by_percentile(scene.ground_truth.radiance, norm);
  return {static_cast<double>(psnr(pred, gt, PsnrDomain::Mu)),
          static_cast<double>(psnr(pred, gt, PsnrDomain::Linear))};
}

namespace {

std::vector<Scene> make_validation_scenes(const TrainConfig& cfg) {
  std::vector<Scene> out;
  for (int i = 0; i < cfg.val_scenes; ++i) {
    SyntheticOptions opt;
    opt.size = cfg.crop > 0 ? cfg.crop : cfg.scene_size;
    opt.motion = cfg.motion;
    opt.noise_sigma = cfg.noise_sigma;
    if (cfg.frames == FramesPolicy::Any) {
      int ref = 0;
      any_pattern(static_cast<std::uint64_t>(i), opt.ev_list, ref);
      opt.reference = ref;
    } else {
      opt.ev_list = ev_bracket(cfg.frames_fixed);
      opt.reference = ev_reference(cfg.frames_fixed);
    }
    out.push_back(make_synthetic_scene(derive(cfg.seed, 0x7a11dull, static_cast<std::uint64_t>(i), 4), opt));
  }
  return out;
}

std::vector<Scene> load_directory_scenes(const std::string& dir) {
  std::vector<Scene> out;
  for (const std::string& p : list_scene_dirs(dir)) {
    Scene s = ingest_scene_dir(p);
    if (!s.has_ground_truth()) throw DataError("training scene has no gt.pfm: " + p);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no scene directories under " + dir);
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  if (cfg.steps <= 0) throw ConfigError("steps must be positive");
  if (cfg.batch <= 0) throw ConfigError("batch must be positive");
  if (cfg.model.fusion == Fusion::Concat && cfg.frames == FramesPolicy::Any)
    throw ConfigError("concat fusion needs a fixed frame count");

  TrainResult res;
  if (!cfg.resume.empty()) {
    res.state = load_checkpoint(cfg.resume);
    const ModelConfig inferred = infer_config(res.state);
    if ((inferred.exposure == ExposureMode::Learned) != (cfg.model.exposure == ExposureMode::Learned))
      throw ConfigError("resume checkpoint disagrees with --exposure");
  } else {
    ModelConfig mc = cfg.model;
    if (mc.fusion == Fusion::Concat) mc.concat_frames = cfg.frames_fixed;
    init_model(res.state, mc, cfg.seed);
  }
  ModelConfig mc = cfg.model;
  if (mc.fusion == Fusion::Concat) mc.concat_frames = cfg.frames_fixed;

  std::vector<Scene> dir_scenes;
  if (!cfg.data_dir.empty()) dir_scenes = load_directory_scenes(cfg.data_dir);
  const std::vector<Scene> val = cfg.data_dir.empty() ? make_validation_scenes(cfg) : std::vector<Scene>{};

  std::ofstream log;
  if (!cfg.log_csv.empty()) {
    log.open(cfg.log_csv);
    if (!log) throw DataError("cannot open log for write: " + cfg.log_csv);
    log << "step,l_tm,l_phot,l_vgg,l_total,psnr_mu,psnr_l\n";
  }

  double last_mu = 0.0, last_l = 0.0;
  auto validate = [&]() {
    if (val.empty()) return;
    double mu = 0.0, li = 0.0;
    for (const Scene& s : val) {
      const ScenePsnr p = evaluate_scene(res.state, mc, s);
      mu += p.mu;
      li += p.linear;
    }
    last_mu = mu / static_cast<double>(val.size());
    last_l = li / static_cast<double>(val.size());
  };

  const int threads = std::max(1, std::min(cfg.threads, cfg.batch));
  const int start_step = static_cast<int>(res.state.step);

  for (int step = start_step; step < cfg.steps; ++step) {
    // Batch data, deterministically derived from (seed, step, slot).
    std::vector<Scene> batch;
    batch.reserve(static_cast<size_t>(cfg.batch));
    for (int slot = 0; slot < cfg.batch; ++slot) {
      if (dir_scenes.empty()) {
        batch.push_back(make_training_scene(cfg, step, slot));
      } else {
        const std::uint64_t pick = derive(cfg.seed, static_cast<std::uint64_t>(step),
                                          static_cast<std::uint64_t>(slot), 5);
        Scene s = dir_scenes[pick % dir_scenes.size()];
        if (cfg.augment_data) {
          AugmentOptions aug;
          aug.crop = cfg.crop;
          s = augment(s, derive(cfg.seed, static_cast<std::uint64_t>(step),
                                static_cast<std::uint64_t>(slot), 3), aug);
        }
        batch.push_back(std::move(s));
      }
    }

    // Per-sample graphs are independent; spread slots over worker threads.
    std::vector<SampleResult> results(static_cast<size_t>(cfg.batch));
    std::vector<std::string> errors(static_cast<size_t>(threads));
    {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
          try {
            for (int slot = w; slot < cfg.batch; slot += threads)
              results[static_cast<size_t>(slot)] =
                  run_sample(res.state, mc, batch[static_cast<size_t>(slot)], cfg.photometric_only);
          } catch (const std::exception& e) {
            errors[static_cast<size_t>(w)] = e.what();
          }
        });
      }
      for (std::thread& th : pool) th.join();
    }
    for (const std::string& e : errors)
      if (!e.empty()) throw NumericError("worker failed at step " + std::to_string(step) + ": " + e);

    // Deterministic accumulation in slot order.
    LossReport mean_loss;
    std::map<std::string, Tensor<float>> grads;
    for (int slot = 0; slot < cfg.batch; ++slot) {
      const SampleResult& r = results[static_cast<size_t>(slot)];
      mean_loss.l_tm += r.loss.l_tm;
      mean_loss.l_phot += r.loss.l_phot;
      mean_loss.l_vgg += r.loss.l_vgg;
      mean_loss.l_total += r.loss.l_total;
      for (const auto& [name, g] : r.grads) {
        auto it = grads.find(name);
        if (it == grads.end()) {
          grads[name] = g;
        } else {
          Tensor<float>& acc = it->second;
          for (std::int64_t i = 0; i < acc.numel(); ++i) acc[i] += g[i];
        }
      }
    }
    const float inv_b = 1.0f / static_cast<float>(cfg.batch);
    mean_loss.l_tm *= inv_b;
    mean_loss.l_phot *= inv_b;
    mean_loss.l_vgg *= inv_b;
    mean_loss.l_total *= inv_b;
    for (auto& [name, g] : grads)
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= inv_b;

    if (!losses_finite(mean_loss)) {
      // Keep the last good state: the failed step never reaches Adam.
      if (!cfg.out_checkpoint.empty()) save_checkpoint(cfg.out_checkpoint, res.state);
      res.aborted_nonfinite = true;
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }

    if (!cfg.train_only_prefixes.empty()) {
      for (auto it = grads.begin(); it != grads.end();)
        it = wants(cfg.train_only_prefixes, it->first) ? std::next(it) : grads.erase(it);
    }
    adam_step(res.state, grads, cfg.lr);

    const int done = step + 1;
    if (done == 1 || done % cfg.eval_every == 0 || done == cfg.steps) validate();

    TrainRow row;
    row.step = done;
    row.loss = mean_loss;
    row.psnr_mu = last_mu;
    row.psnr_l = last_l;
    res.log.push_back(row);
    if (log)
      log << done << "," << mean_loss.l_tm << "," << mean_loss.l_phot << "," << mean_loss.l_vgg << ","
          << mean_loss.l_total << "," << last_mu << "," << last_l << "\n";

    if (!cfg.out_checkpoint.empty() &&
        (done % cfg.checkpoint_every == 0 || done == cfg.steps))
      save_checkpoint(cfg.out_checkpoint, res.state);
  }
  return res;
}

}  // namespace flexhdr

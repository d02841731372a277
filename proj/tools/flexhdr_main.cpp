#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "flexhdr/baseline.hpp"
#include "flexhdr/dataset.hpp"
#include "flexhdr/gradsuite.hpp"
#include "flexhdr/radiometry.hpp"
#include "flexhdr/train.hpp"

namespace fs = std::filesystem;
using namespace flexhdr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGradFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonModelFlags {
  std::string exposure = "learned";
  std::string fusion = "maxpool";
  std::string align_unc = "on";
  int flow_iters = 16;
};

void apply_model_flags(ModelConfig& mc, const CommonModelFlags& f) {
  if (f.exposure == "learned")
    mc.exposure = ExposureMode::Learned;
  else if (f.exposure == "fixed")
    mc.exposure = ExposureMode::Fixed;
  else
    throw ConfigError("--exposure must be learned or fixed");
  if (f.fusion == "maxpool")
    mc.fusion = Fusion::MultiStageMax;
  else if (f.fusion == "concat")
    mc.fusion = Fusion::Concat;
  else
    throw ConfigError("--fusion must be maxpool or concat");
  if (f.align_unc == "on")
    mc.alignment_uncertainty = true;
  else if (f.align_unc == "off")
    mc.alignment_uncertainty = false;
  else
    throw ConfigError("--alignment-uncertainty must be on or off");
  if (f.flow_iters < 1) throw ConfigError("--flow-iters must be >= 1");
  mc.flow_iters = f.flow_iters;
}

int cmd_train(TrainConfig cfg, const CommonModelFlags& mf, const std::string& frames,
              const std::string& motion) {
  apply_model_flags(cfg.model, mf);
  if (frames == "any") {
    cfg.frames = FramesPolicy::Any;
  } else {
    cfg.frames = FramesPolicy::Fixed;
    try {
      cfg.frames_fixed = std::stoi(frames);
    } catch (...) {
      throw ConfigError("--frames must be 'any' or a frame count");
    }
    if (cfg.frames_fixed < 1 || cfg.frames_fixed > 4)
      throw ConfigError("--frames count must be in 1..4");
  }
  if (motion == "none")
    cfg.motion = Motion::None;
  else if (motion == "translation")
    cfg.motion = Motion::Translation;
  else if (motion == "mixed")
    cfg.motion = Motion::Mixed;
  else
    throw ConfigError("--motion must be none, translation or mixed");

  TrainResult res = train(cfg);
  const TrainRow& last = res.log.back();
  std::printf("trained %d steps: l_total %.5f psnr_mu %.2f psnr_l %.2f -> %s\n",
              static_cast<int>(res.state.step), last.loss.l_total, last.psnr_mu, last.psnr_l,
              cfg.out_checkpoint.c_str());
  return kExitOk;
}

int cmd_merge(const std::string& ck_path, const std::string& scene_dir, const std::string& out_pfm,
              const std::string& out_ppm, int ref, int flow_iters, const std::string& dump_dir) {
  const ModelState<float> state = load_checkpoint(ck_path);
  ModelConfig mc = infer_config(state);
  mc.flow_iters = flow_iters;

  Scene scene = ingest_scene_dir(scene_dir);
  if (ref >= 0) {
    if (ref >= scene.frame_set.size())
      throw ConfigError("--ref " + std::to_string(ref) + " out of range for " +
                        std::to_string(scene.frame_set.size()) + " frames");
    scene.frame_set.reference_index = ref;
  }

  InferenceOutputs out = infer(state, mc, scene.frame_set);
  write_pfm(out_pfm, out.hdr.radiance);
  if (!out_ppm.empty()) {
    const float norm = percentile(out.hdr.radiance, 99.0f);
    write_ppm(out_ppm, tonemap_mu(normalize_by_percentile(out.hdr.radiance, norm)));
  }
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    char name[64];
    for (size_t i = 0; i < out.confidence.size(); ++i) {
      std::snprintf(name, sizeof name, "confidence_%02zu.pfm", i);
      write_pfm((fs::path(dump_dir) / name).string(), out.confidence[i]);
      if (out.attention[i].numel() > 0) {
        std::snprintf(name, sizeof name, "attention_%02zu.pfm", i);
        write_pfm((fs::path(dump_dir) / name).string(), out.attention[i]);
      }
      if (out.flows[i].numel() > 0) {
        std::snprintf(name, sizeof name, "flow_%02zu.pfm", i);
        write_pfm((fs::path(dump_dir) / name).string(), out.flows[i]);
      }
    }
  }
  std::printf("merged %d frames (ref %d) -> %s\n", scene.frame_set.size(),
              scene.frame_set.reference_index, out_pfm.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& ck_path, const std::string& scenes_path, int flow_iters,
             const std::string& out_csv) {
  const ModelState<float> state = load_checkpoint(ck_path);
  ModelConfig mc = infer_config(state);
  mc.flow_iters = flow_iters;

  std::vector<std::string> dirs;
  if (fs::exists(fs::path(scenes_path) / "exposures.txt"))
    dirs.push_back(scenes_path);
  else
    dirs = list_scene_dirs(scenes_path);
  if (dirs.empty()) throw DataError("no scenes under " + scenes_path);

  std::ostringstream csv;
  csv << "scene,psnr_mu,psnr_l\n";
  double sum_mu = 0, sum_l = 0;
  for (const std::string& d : dirs) {
    Scene scene = ingest_scene_dir(d);
    if (!scene.has_ground_truth()) throw DataError("scene has no gt.pfm: " + d);
    const ScenePsnr p = evaluate_scene(state, mc, scene);
    csv << fs::path(d).filename().string() << "," << p.mu << "," << p.linear << "\n";
    sum_mu += p.mu;
    sum_l += p.linear;
  }
  csv << "mean," << sum_mu / static_cast<double>(dirs.size()) << ","
      << sum_l / static_cast<double>(dirs.size()) << "\n";
  std::cout << csv.str();
  if (!out_csv.empty()) {
    std::ofstream os(out_csv);
    if (!os) throw DataError("cannot open for write: " + out_csv);
    os << csv.str();
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& ops_csv, bool inject_fault) {
  std::vector<std::string> filter;
  if (!ops_csv.empty()) {
    std::istringstream ss(ops_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      const auto known = gradient_suite_ops();
      if (std::find(known.begin(), known.end(), tok) == known.end())
        throw ConfigError("unknown op '" + tok + "' for --ops");
      filter.push_back(tok);
    }
  }
  testhooks::flip_conv_input_grad = inject_fault;
  const std::vector<OpCheck> checks = run_gradient_suite(filter, seed);
  testhooks::flip_conv_input_grad = false;

  bool all_ok = true;
  for (const OpCheck& c : checks) {
    std::printf("%-22s %-16s max_rel_err %.3e %s\n", c.op.c_str(), c.input.c_str(), c.max_rel_err,
                c.passed ? "ok" : "FAIL");
    all_ok = all_ok && c.passed;
  }
  if (!all_ok) {
    for (const OpCheck& c : checks)
      if (!c.passed)
        std::printf("failure: %s (%s) at coordinate %lld, rel err %.3e\n", c.op.c_str(),
                    c.input.c_str(), static_cast<long long>(c.worst_coord), c.max_rel_err);
    return kExitGradFail;
  }
  std::printf("gradient suite: all %zu checks ok\n", checks.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flexhdr: flexible multi-exposure HDR merging"};
  app.require_subcommand(1);

  // train
  auto* tr = app.add_subcommand("train", "optimise a model on synthetic or directory scenes");
  TrainConfig tcfg;
  CommonModelFlags tmf;
  std::string frames = "any", motion = "mixed";
  bool synthetic = false;
  tr->add_flag("--synthetic", synthetic, "use the synthetic scene generator (default)");
  tr->add_option("--data", tcfg.data_dir, "directory of scene subdirectories");
  tr->add_option("--out", tcfg.out_checkpoint, "output checkpoint path")->required();
  tr->add_option("--log", tcfg.log_csv, "metrics CSV path");
  tr->add_option("--steps", tcfg.steps, "total optimisation steps");
  tr->add_option("--batch", tcfg.batch, "scenes per step");
  tr->add_option("--crop", tcfg.crop, "training crop size");
  tr->add_option("--lr", tcfg.lr, "Adam learning rate");
  tr->add_option("--seed", tcfg.seed, "run seed; fully determines the run");
  tr->add_option("--threads", tcfg.threads, "worker threads over the batch");
  tr->add_option("--frames", frames, "'any' or a fixed frame count (1..4)");
  tr->add_option("--motion", motion, "synthetic motion: none|translation|mixed");
  tr->add_option("--scene-size", tcfg.scene_size, "synthetic render size before crop");
  tr->add_option("--resume", tcfg.resume, "checkpoint to resume from");
  tr->add_option("--eval-every", tcfg.eval_every, "validation PSNR period");
  tr->add_option("--checkpoint-every", tcfg.checkpoint_every, "checkpoint save period");
  tr->add_option("--exposure", tmf.exposure, "exposure model: learned|fixed");
  tr->add_option("--fusion", tmf.fusion, "fusion mechanism: maxpool|concat");
  tr->add_option("--alignment-uncertainty", tmf.align_unc, "alignment uncertainty: on|off");
  tr->add_option("--flow-iters", tmf.flow_iters, "flow refinement iterations");

  // merge
  auto* mg = app.add_subcommand("merge", "merge one scene directory into an HDR image");
  std::string m_ck, m_scene, m_out, m_ppm, m_dump;
  int m_ref = -1, m_iters = 16;
  mg->add_option("--checkpoint", m_ck, "model checkpoint")->required();
  mg->add_option("--scene", m_scene, "scene directory")->required();
  mg->add_option("--out", m_out, "output PFM (linear HDR)")->required();
  mg->add_option("--tonemapped", m_ppm, "optional mu-law tonemapped PPM");
  mg->add_option("--ref", m_ref, "reference frame index (default: scene's reference.txt or 0)");
  mg->add_option("--flow-iters", m_iters, "flow refinement iterations");
  mg->add_option("--dump-maps", m_dump, "directory for confidence/attention/flow PFMs");

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR-mu / PSNR-L over scenes with ground truth");
  std::string e_ck, e_scenes, e_csv;
  int e_iters = 16;
  ev->add_option("--checkpoint", e_ck, "model checkpoint")->required();
  ev->add_option("--scenes", e_scenes, "scene directory or directory of scenes")->required();
  ev->add_option("--flow-iters", e_iters, "flow refinement iterations");
  ev->add_option("--out", e_csv, "also write the CSV here");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification (f64)");
  std::uint64_t g_seed = 0;
  std::string g_ops;
  bool g_fault = false;
  gc->add_option("--seed", g_seed, "suite seed");
  gc->add_option("--ops", g_ops, "comma-separated op filter");
  gc->add_flag("--inject-conv-sign-flip", g_fault, "test hook: corrupt conv2d backward");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (tr->parsed()) {
      if (!tcfg.data_dir.empty() && synthetic)
        throw ConfigError("--synthetic and --data are mutually exclusive");
      return cmd_train(tcfg, tmf, frames, motion);
    }
    if (mg->parsed()) return cmd_merge(m_ck, m_scene, m_out, m_ppm, m_ref, m_iters, m_dump);
    if (ev->parsed()) return cmd_eval(e_ck, e_scenes, e_iters, e_csv);
    if (gc->parsed()) return cmd_gradcheck(g_seed, g_ops, g_fault);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

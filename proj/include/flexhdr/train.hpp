#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexhdr/losses.hpp"
#include "flexhdr/model.hpp"
#include "flexhdr/synthetic.hpp"

namespace flexhdr {

// Frame-count policy for synthetic training batches. `Any` samples uniformly
// from the four bracket subsets {M}, {S,M}, {M,L}, {S,M,L}.
enum class FramesPolicy { Fixed, Any };

struct TrainConfig {
  int steps = 200;
  int batch = 4;
  int crop = 64;
  float lr = 1e-4f;
  std::uint64_t seed = 0;
  int threads = 2;

  ModelConfig model;

  FramesPolicy frames = FramesPolicy::Any;
  int frames_fixed = 3;

  std::string data_dir;  // scene directories; empty = synthetic generator
  int scene_size = 96;
  Motion motion = Motion::Mixed;
  float noise_sigma = 0.5f / 255.0f;
  bool augment_data = true;  // false: feed scenes untouched (no crop/flip/rot)

  std::string out_checkpoint;
  std::string log_csv;
  std::string resume;

  int eval_every = 50;
  int checkpoint_every = 100;
  int val_scenes = 4;

  // When set, only parameters whose name starts with one of these prefixes
  // are updated (the flow-only self-supervised regime).
  std::vector<std::string> train_only_prefixes;
  // When set, L_phot is the whole objective.
  bool photometric_only = false;
};

struct TrainRow {
  int step = 0;
  LossReport loss;
  double psnr_mu = 0, psnr_l = 0;
};

struct TrainResult {
  ModelState<float> state;
  std::vector<TrainRow> log;
  bool aborted_nonfinite = false;
};

// EV bracket and reference index used for an n-frame synthetic scene.
std::vector<float> ev_bracket(int n_frames);
int ev_reference(int n_frames);

// Deterministic synthetic batch element for (seed, step, slot).
Scene make_training_scene(const TrainConfig& cfg, int step, int slot);

// Full optimisation loop: forward, losses, reverse sweep, Adam; periodic
// validation PSNR and checkpointing; abort on non-finite loss keeping the
// last good state. Deterministic in (config, seed), including across resume.
TrainResult train(const TrainConfig& cfg);

// Convenience: forward pass on one frame set, values only.
struct InferenceOutputs {
  HdrImage hdr;
  std::vector<Tensor<float>> confidence;   // E_i
  std::vector<Tensor<float>> attention;    // channel mean of A_i; empty for reference
  std::vector<Tensor<float>> flows;        // H x W x 2; empty for reference
};
InferenceOutputs infer(const ModelState<float>& state, const ModelConfig& cfg, const FrameSet& fs);

// Validation metric pair on one scene with ground truth.
struct ScenePsnr {
  double mu = 0, linear = 0;
};
ScenePsnr evaluate_scene(const ModelState<float>& state, const ModelConfig& cfg, const Scene& scene);

}  // namespace flexhdr

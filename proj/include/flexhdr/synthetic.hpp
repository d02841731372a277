#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flexhdr/scene.hpp"

namespace flexhdr {

enum class Motion { None, Translation, Mixed };

struct SyntheticOptions {
  int size = 96;
  std::vector<float> ev_list = {-2.0f, 0.0f, 2.0f};
  int reference = -1;  // default: the frame whose EV is closest to 0
  Motion motion = Motion::Mixed;
  float max_shift = 6.0f;       // pixels, per axis
  float noise_sigma = 0.5f / 255.0f;
  bool quantize = true;
  // When nonempty (one (dx, dy) pair per frame), overrides the random motion
  // draw; each pair is the exact backward flow of its frame.
  std::vector<std::array<float, 2>> shifts;
};

// Renders a band-limited random radiance field (Gaussian blobs on a gradient
// floor), then exposes each frame at t = 2^EV with a known per-frame
// displacement: clip, gamma-encode, quantize to 8 bits, add read noise.
// Ground truth is the unclipped radiance at reference geometry; gt_flows hold
// the exact backward flow aligning each frame to the reference.
Scene make_synthetic_scene(std::uint64_t seed, const SyntheticOptions& opt);

struct AugmentOptions {
  int crop = 64;          // 0 = full size
  bool flips = true;
  bool rotations = true;
};

// One random geometric transform (crop, flips, right-angle rotation) applied
// identically to every frame, the ground truth, and the flow labels.
Scene augment(const Scene& scene, std::uint64_t seed, const AugmentOptions& opt);

}  // namespace flexhdr

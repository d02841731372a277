#pragma once

#include <vector>

#include "flexhdr/image.hpp"

namespace flexhdr {

// A training/evaluation unit: a frame set, ground-truth radiance aligned to
// the reference, and (for synthetic data) the true backward flow per frame.
struct Scene {
  FrameSet frame_set;
  HdrImage ground_truth;           // empty radiance if unavailable
  std::vector<Tensor<float>> gt_flows;  // H x W x 2 per frame; empty if unknown

  bool has_ground_truth() const { return ground_truth.radiance.numel() > 0; }
  bool has_flows() const { return !gt_flows.empty(); }
};

}  // namespace flexhdr

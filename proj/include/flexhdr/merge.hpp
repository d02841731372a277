#pragma once

#include <vector>

#include "flexhdr/ops.hpp"

namespace flexhdr {

// Residual dense block: densely connected 3x3 convs with `growth` channels
// each, a 1x1 local fusion back to the input width, and a local residual.
struct RdbParams {
  std::vector<VarId> layer_w, layer_b;
  VarId fuse_w, fuse_b;
};

template <typename T>
VarId rdb(Tape<T>& t, const RdbParams& p, VarId x) {
  VarId dense = x;
  for (size_t j = 0; j < p.layer_w.size(); ++j) {
    const VarId y = leaky_relu(t, conv2d(t, dense, p.layer_w[j], p.layer_b[j]));
    dense = concat_c(t, {dense, y});
  }
  return add(t, x, conv2d(t, dense, p.fuse_w, p.fuse_b));
}

struct MergeParams {
  std::vector<RdbParams> rdbs;        // one per stage
  std::vector<VarId> share_w, share_b;  // per-stage pooled-context mix (max-pool fusion)
  VarId concat_w = -1, concat_b = -1;   // single-shot fusion (ablation)
};

// Multi-stage fusion: each stream runs the stage's RDB with shared weights,
// then mixes with the elementwise max over all streams; a final global max
// collapses the set. Forward output is exactly invariant to stream order.
template <typename T>
VarId grdb_fuse(Tape<T>& t, const MergeParams& p, const std::vector<VarId>& streams) {
  if (streams.empty()) throw std::invalid_argument("grdb_fuse: empty stream list");
  std::vector<VarId> g = streams;
  for (size_t s = 0; s < p.rdbs.size(); ++s) {
    for (VarId& v : g) v = rdb(t, p.rdbs[s], v);
    const VarId pooled = set_max(t, g);
    for (VarId& v : g) v = conv2d(t, concat_c(t, {v, pooled}), p.share_w[s], p.share_b[s]);
  }
  return set_max(t, g);
}

// Ablation fusion: concatenate all streams once, project, then run the RDB
// chain on the single joined stream. Requires a fixed stream count.
template <typename T>
VarId concat_fuse(Tape<T>& t, const MergeParams& p, const std::vector<VarId>& streams) {
  if (streams.empty()) throw std::invalid_argument("concat_fuse: empty stream list");
  VarId g = conv2d(t, concat_c(t, streams), p.concat_w, p.concat_b);
  for (const RdbParams& r : p.rdbs) g = rdb(t, r, g);
  return g;
}

struct ReconstructParams {
  VarId conv1_w, conv1_b;
  VarId conv2_w, conv2_b;
};

// Global residual from the regulated reference features, two refinement
// convs, terminal ReLU for nonnegative radiance.
template <typename T>
VarId reconstruct(Tape<T>& t, const ReconstructParams& p, VarId fused, VarId f_ref_regulated) {
  const VarId y = add(t, fused, f_ref_regulated);
  const VarId h1 = leaky_relu(t, conv2d(t, y, p.conv1_w, p.conv1_b));
  return relu(t, conv2d(t, h1, p.conv2_w, p.conv2_b));
}

}  // namespace flexhdr

#pragma once

#include <vector>

#include "flexhdr/ops.hpp"

namespace flexhdr {

// U_i = |F_i^w - F_r| o E_r: feature disagreement after alignment, measured
// only where the reference is trustworthy. Zero wherever F_i^w = F_r or E_r = 0.
template <typename T>
VarId alignment_uncertainty(Tape<T>& t, VarId f_warped, VarId f_ref, VarId e_ref) {
  return mul(t, abs_val(t, sub(t, f_warped, f_ref)), e_ref);
}

struct AttentionParams {
  VarId conv1_w, conv1_b;
  VarId conv2_w, conv2_b;
};

// Predicts a per-channel attention map in [0,1] from the warped features, the
// reference features, the alignment uncertainty (optional ablation), the
// warped exposure confidence and the pooled context, then regulates:
// F'_i = F_i^w o A_i o E_i^w. The exposure factor is a hard gate: wherever
// E_i^w = 0 the stream contributes nothing downstream.
// Returns {regulated features, attention map}.
template <typename T>
std::pair<VarId, VarId> apply_attention(Tape<T>& t, const AttentionParams& p, VarId f_warped,
                                        VarId f_ref, VarId uncertainty, VarId e_warped,
                                        VarId pooled_context) {
  std::vector<VarId> parts{f_warped, f_ref};
  if (uncertainty >= 0) parts.push_back(uncertainty);
  parts.push_back(e_warped);
  parts.push_back(pooled_context);
  const VarId h1 = leaky_relu(t, conv2d(t, concat_c(t, parts), p.conv1_w, p.conv1_b));
  const VarId attn = sigmoid(t, conv2d(t, h1, p.conv2_w, p.conv2_b));
  return {mul(t, mul(t, f_warped, attn), e_warped), attn};
}

}  // namespace flexhdr

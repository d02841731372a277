#pragma once

#include <vector>

#include "flexhdr/ops.hpp"

namespace flexhdr {

// Identity sampling grid: coords(y, x) = (x, y) in source pixel units.
template <typename T>
Tensor<T> identity_grid(int h, int w) {
  Tensor<T> g(Shape::hwc(h, w, 2));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      g.at(y, x, 0) = static_cast<T>(x);
      g.at(y, x, 1) = static_cast<T>(y);
    }
  return g;
}

// Backward warp: output(p) samples input(p + flow(p)). A zero field is the
// identity. Applied identically to features and confidence maps so they stay
// spatially registered.
template <typename T>
VarId warp(Tape<T>& t, VarId input, VarId flow) {
  const Tensor<T>& in = t.value(input);
  const Tensor<T>& fl = t.value(flow);
  if (in.h() != fl.h() || in.w() != fl.w())
    throw std::invalid_argument("warp: spatial mismatch " + in.shape().str() + " vs " + fl.shape().str());
  const VarId grid = t.constant(identity_grid<T>(in.h(), in.w()));
  return bilinear_resample(t, input, add(t, grid, flow));
}

// Upsamples a coarse flow field to (h, w) and rescales the displacement
// values by the zoom factor so they stay in output pixel units (x8 when the
// encoder downsampled by 8).
template <typename T>
VarId upsample_flow(Tape<T>& t, VarId coarse, int h, int w) {
  const Tensor<T>& cf = t.value(coarse);
  const int hc = cf.h(), wc = cf.w();
  Tensor<T> coords(Shape::hwc(h, w, 2));
  const T sx = static_cast<T>(wc) / static_cast<T>(w);
  const T sy = static_cast<T>(hc) / static_cast<T>(h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      coords.at(y, x, 0) = (static_cast<T>(x) + T(0.5)) * sx - T(0.5);
      coords.at(y, x, 1) = (static_cast<T>(y) + T(0.5)) * sy - T(0.5);
    }
  const VarId up = bilinear_resample(t, coarse, t.constant(std::move(coords)));
  return scale_per_channel(t, up, {static_cast<T>(w) / static_cast<T>(wc),
                                   static_cast<T>(h) / static_cast<T>(hc)});
}

// Parameter handles for the flow network: a 3-stage strided encoder with a
// pooled-context mix after each stage, and a recurrent refiner.
struct FlowParams {
  VarId enc1_w, enc1_b;
  VarId share1_w, share1_b;
  VarId enc2_w, enc2_b;
  VarId share2_w, share2_b;
  VarId enc3_w, enc3_b;
  VarId share3_w, share3_b;
  VarId ref1_w, ref1_b;
  VarId ref2_w, ref2_b;
  VarId ref3_w, ref3_b;  // zero-initialised: iteration 0 predicts no motion
};

// Runs one encoder stage for every stream, then mixes each stream with the
// elementwise max over all of them (the set-processing share step).
template <typename T>
std::vector<VarId> flow_encoder_stage(Tape<T>& t, const std::vector<VarId>& xs, VarId enc_w, VarId enc_b,
                                      VarId share_w, VarId share_b) {
  std::vector<VarId> enc(xs.size());
  for (size_t i = 0; i < xs.size(); ++i)
    enc[i] = leaky_relu(t, conv2d(t, xs[i], enc_w, enc_b, /*stride=*/2));
  const VarId pooled = set_max(t, enc);
  std::vector<VarId> out(xs.size());
  for (size_t i = 0; i < xs.size(); ++i)
    out[i] = conv2d(t, concat_c(t, {enc[i], pooled}), share_w, share_b);
  return out;
}

// Encodes every stream's [F_i, F_r, E_i] stack down by 8x. All streams,
// including the reference, contribute context to the pooled maxima.
template <typename T>
std::vector<VarId> flow_encode(Tape<T>& t, const FlowParams& p, const std::vector<VarId>& features,
                               const std::vector<VarId>& confidences, int ref_index) {
  std::vector<VarId> ins(features.size());
  for (size_t i = 0; i < features.size(); ++i)
    ins[i] = concat_c(t, {features[i], features[static_cast<size_t>(ref_index)], confidences[i]});
  std::vector<VarId> s1 = flow_encoder_stage(t, ins, p.enc1_w, p.enc1_b, p.share1_w, p.share1_b);
  std::vector<VarId> s2 = flow_encoder_stage(t, s1, p.enc2_w, p.enc2_b, p.share2_w, p.share2_b);
  return flow_encoder_stage(t, s2, p.enc3_w, p.enc3_b, p.share3_w, p.share3_b);
}

// Iterative refinement at 1/8 resolution: starting from zero flow, each
// iteration re-warps the stream's encoding by the running flow and emits an
// increment through the shared (recurrent) conv stack. Returns the flow
// upsampled to (h, w) in full-resolution pixel units.
template <typename T>
VarId estimate_flow(Tape<T>& t, const FlowParams& p, VarId enc_i, VarId enc_r, int iterations, int h, int w) {
  const Tensor<T>& e = t.value(enc_i);
  VarId flow = t.constant(Tensor<T>::zeros(Shape::hwc(e.h(), e.w(), 2)));
  for (int it = 0; it < iterations; ++it) {
    const VarId warped = warp(t, enc_i, flow);
    const VarId cat = concat_c(t, {warped, enc_r, flow});
    const VarId h1 = leaky_relu(t, conv2d(t, cat, p.ref1_w, p.ref1_b));
    const VarId h2 = leaky_relu(t, conv2d(t, h1, p.ref2_w, p.ref2_b));
    const VarId delta = conv2d(t, h2, p.ref3_w, p.ref3_b);
    flow = add(t, flow, delta);
  }
  return upsample_flow(t, flow, h, w);
}

}  // namespace flexhdr

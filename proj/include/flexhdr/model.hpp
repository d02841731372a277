#pragma once

#include <map>
#include <string>
#include <vector>

#include "flexhdr/attention.hpp"
#include "flexhdr/exposure.hpp"
#include "flexhdr/flow.hpp"
#include "flexhdr/image.hpp"
#include "flexhdr/merge.hpp"
#include "flexhdr/radiometry.hpp"
#include "flexhdr/state.hpp"

namespace flexhdr {

enum class Fusion { MultiStageMax, Concat };
enum class ExposureMode { Learned, Fixed };

struct ModelConfig {
  static constexpr int kFeatureChannels = 64;

  int flow_iters = 16;
  ExposureMode exposure = ExposureMode::Learned;
  bool alignment_uncertainty = true;
  Fusion fusion = Fusion::MultiStageMax;
  int concat_frames = 3;  // fixed stream count, concat fusion only
  int rdb_layers = 4;
  int rdb_growth = 16;
  int rdb_blocks = 3;
};

namespace detail {

template <typename T>
void add_conv(ModelState<T>& s, const std::string& name, int k, int cin, int cout,
              std::mt19937_64& rng, bool zero = false) {
  Tensor<T> w = zero ? Tensor<T>::zeros(Shape{k, k, cin, cout})
                     : uniform_conv_init<T>(Shape{k, k, cin, cout}, rng);
  s.add_param(name + ".w", std::move(w));
  s.add_param(name + ".b", Tensor<T>::zeros(Shape{cout}));
}

}  // namespace detail

// Creates every learnable parameter for the given configuration. Creation
// order is fixed so one seed always yields the same initial state.
template <typename T>
void init_model(ModelState<T>& s, const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int C = ModelConfig::kFeatureChannels;

  detail::add_conv(s, "features", 3, 6, C, rng);
  if (cfg.exposure == ExposureMode::Learned) detail::add_conv(s, "exposure", 3, 7, 2, rng);

  detail::add_conv(s, "flow.enc1", 3, 2 * C + 1, C, rng);
  detail::add_conv(s, "flow.share1", 1, 2 * C, C, rng);
  detail::add_conv(s, "flow.enc2", 3, C, 96, rng);
  detail::add_conv(s, "flow.share2", 1, 192, 96, rng);
  detail::add_conv(s, "flow.enc3", 3, 96, 128, rng);
  detail::add_conv(s, "flow.share3", 1, 256, 128, rng);
  detail::add_conv(s, "flow.ref1", 3, 258, 96, rng);
  detail::add_conv(s, "flow.ref2", 3, 96, 64, rng);
  detail::add_conv(s, "flow.ref3", 3, 64, 2, rng, /*zero=*/true);

  const int att_in = 2 * C + (cfg.alignment_uncertainty ? C : 0) + 1 + C;
  detail::add_conv(s, "att.conv1", 3, att_in, C, rng);
  detail::add_conv(s, "att.conv2", 3, C, C, rng);

  for (int b = 1; b <= cfg.rdb_blocks; ++b) {
    const std::string base = "merge.rdb" + std::to_string(b);
    for (int j = 0; j < cfg.rdb_layers; ++j)
      detail::add_conv(s, base + ".l" + std::to_string(j), 3, C + j * cfg.rdb_growth, cfg.rdb_growth, rng);
    detail::add_conv(s, base + ".fuse", 1, C + cfg.rdb_layers * cfg.rdb_growth, C, rng);
  }
  if (cfg.fusion == Fusion::MultiStageMax) {
    for (int b = 1; b <= cfg.rdb_blocks; ++b)
      detail::add_conv(s, "merge.share" + std::to_string(b), 1, 2 * C, C, rng);
  } else {
    detail::add_conv(s, "merge.concat", 1, cfg.concat_frames * C, C, rng);
  }

  detail::add_conv(s, "recon.conv1", 3, C, C, rng);
  detail::add_conv(s, "recon.conv2", 3, C, 3, rng);
}

// Recovers the architecture switches from a checkpoint's parameter shapes.
inline ModelConfig infer_config(const ModelState<float>& s) {
  ModelConfig cfg;
  const int C = ModelConfig::kFeatureChannels;
  cfg.exposure = s.has("exposure.w") ? ExposureMode::Learned : ExposureMode::Fixed;
  if (s.has("merge.concat.w")) {
    cfg.fusion = Fusion::Concat;
    cfg.concat_frames = s.at("merge.concat.w").shape()[2] / C;
  }
  cfg.alignment_uncertainty = s.at("att.conv1.w").shape()[2] == 3 * C + 1 + C;
  int layers = 0;
  while (s.has("merge.rdb1.l" + std::to_string(layers) + ".w")) ++layers;
  cfg.rdb_layers = layers;
  cfg.rdb_growth = s.at("merge.rdb1.l0.w").shape()[3];
  int blocks = 0;
  while (s.has("merge.rdb" + std::to_string(blocks + 1) + ".l0.w")) ++blocks;
  cfg.rdb_blocks = blocks;
  return cfg;
}

// Injects state parameters as tape leaves, each exactly once per graph.
template <typename T>
class ParamVars {
 public:
  ParamVars(Tape<T>& tape, const ModelState<T>& state) : tape_(&tape), state_(&state) {}

  VarId operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    return cache_[name] = tape_->param(state_->at(name), name);
  }

 private:
  Tape<T>* tape_;
  const ModelState<T>* state_;
  std::map<std::string, VarId> cache_;
};

// Per-frame network inputs derived from an LdrFrame: X_i = [I_i, L_i] and the
// RGB mean of I_i. Plain data; the graph sees them as constants.
template <typename T>
struct StreamInputs {
  Tensor<T> x;     // H x W x 6
  Tensor<T> mean;  // H x W x 1
};

template <typename T>
StreamInputs<T> make_stream_inputs(const LdrFrame& frame) {
  const Tensor<float>& img = frame.pixels;
  Tensor<float> lin = linearize(frame);
  const int h = img.h(), w = img.w();
  StreamInputs<T> in;
  in.x = Tensor<T>(Shape::hwc(h, w, 6));
  in.mean = Tensor<T>(Shape::hwc(h, w, 1));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T m = T(0);
      for (int c = 0; c < 3; ++c) {
        in.x.at(y, x, c) = static_cast<T>(img.at(y, x, c));
        in.x.at(y, x, 3 + c) = static_cast<T>(lin.at(y, x, c));
        m += static_cast<T>(img.at(y, x, c));
      }
      in.mean.at(y, x, 0) = m / T(3);
    }
  return in;
}

template <typename T>
std::vector<StreamInputs<T>> make_set_inputs(const FrameSet& fs) {
  std::vector<StreamInputs<T>> out;
  out.reserve(fs.frames.size());
  for (const LdrFrame& f : fs.frames) out.push_back(make_stream_inputs<T>(f));
  return out;
}

// Everything the losses and the exporters need from one forward pass. Vectors
// indexed by stream; reference entries hold the unwarped originals.
template <typename T>
struct ForwardResult {
  VarId hdr = -1;                  // H x W x 3 nonnegative radiance
  int ref_index = 0;
  std::vector<VarId> confidence;   // E_i
  std::vector<VarId> confidence_w; // E_i^w (ref: = E_r)
  std::vector<VarId> features_w;   // F_i^w (ref: = F_r)
  std::vector<VarId> flows;        // full-res flow, -1 for reference
  std::vector<VarId> attention;    // A_i, -1 for reference
};

// The full pipeline: exposure confidence, shared feature extraction,
// set-informed iterative flow, alignment-uncertainty attention, and
// permutation-invariant fusion into one HDR image aligned to the reference.
template <typename T>
ForwardResult<T> forward_hdr(Tape<T>& t, ParamVars<T>& P, const ModelConfig& cfg,
                             const std::vector<StreamInputs<T>>& inputs, int ref_index) {
  const int n = static_cast<int>(inputs.size());
  if (n == 0) throw std::invalid_argument("forward_hdr: empty frame set");
  if (ref_index < 0 || ref_index >= n) throw std::invalid_argument("forward_hdr: reference index out of range");
  if (cfg.fusion == Fusion::Concat && n != cfg.concat_frames)
    throw std::invalid_argument("forward_hdr: concat fusion is fixed to " +
                                std::to_string(cfg.concat_frames) + " frames, got " + std::to_string(n));
  const int h = inputs[0].x.h(), w = inputs[0].x.w();

  ForwardResult<T> r;
  r.ref_index = ref_index;
  r.flows.assign(static_cast<size_t>(n), -1);
  r.attention.assign(static_cast<size_t>(n), -1);

  // Exposure confidence per stream.
  std::vector<VarId> xs(n), means(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = t.constant(inputs[static_cast<size_t>(i)].x);
    means[i] = t.constant(inputs[static_cast<size_t>(i)].mean);
  }
  for (int i = 0; i < n; ++i) {
    ExposureParams<T> ep = cfg.exposure == ExposureMode::Learned
                               ? predict_exposure_params(t, xs[i], means[i], P("exposure.w"), P("exposure.b"))
                               : fixed_exposure_params<T>(t);
    r.confidence.push_back(exposure_confidence(t, means[i], ep));
  }

  // Shared feature extraction.
  std::vector<VarId> feats(n);
  for (int i = 0; i < n; ++i)
    feats[i] = leaky_relu(t, conv2d(t, xs[i], P("features.w"), P("features.b")));
  const VarId f_ref = feats[static_cast<size_t>(ref_index)];
  const VarId e_ref = r.confidence[static_cast<size_t>(ref_index)];

  // Flow + warping. The reference stream keeps identity geometry.
  r.features_w.assign(static_cast<size_t>(n), -1);
  r.confidence_w.assign(static_cast<size_t>(n), -1);
  r.features_w[static_cast<size_t>(ref_index)] = f_ref;
  r.confidence_w[static_cast<size_t>(ref_index)] = e_ref;
  if (n > 1) {
    FlowParams fp{P("flow.enc1.w"), P("flow.enc1.b"), P("flow.share1.w"), P("flow.share1.b"),
                  P("flow.enc2.w"), P("flow.enc2.b"), P("flow.share2.w"), P("flow.share2.b"),
                  P("flow.enc3.w"), P("flow.enc3.b"), P("flow.share3.w"), P("flow.share3.b"),
                  P("flow.ref1.w"), P("flow.ref1.b"), P("flow.ref2.w"), P("flow.ref2.b"),
                  P("flow.ref3.w"), P("flow.ref3.b")};
    std::vector<VarId> enc = flow_encode(t, fp, feats, r.confidence, ref_index);
    for (int i = 0; i < n; ++i) {
      if (i == ref_index) continue;
      const VarId flow = estimate_flow(t, fp, enc[static_cast<size_t>(i)],
                                       enc[static_cast<size_t>(ref_index)], cfg.flow_iters, h, w);
      r.flows[static_cast<size_t>(i)] = flow;
      r.features_w[static_cast<size_t>(i)] = warp(t, feats[static_cast<size_t>(i)], flow);
      r.confidence_w[static_cast<size_t>(i)] = warp(t, r.confidence[static_cast<size_t>(i)], flow);
    }
  }

  // Attention on non-reference streams; the reference is gated by its own
  // confidence only.
  const VarId pooled_att = set_max(t, r.features_w);
  AttentionParams ap{P("att.conv1.w"), P("att.conv1.b"), P("att.conv2.w"), P("att.conv2.b")};
  std::vector<VarId> regulated(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i == ref_index) {
      regulated[static_cast<size_t>(i)] = mul(t, f_ref, e_ref);
      continue;
    }
    const VarId fw = r.features_w[static_cast<size_t>(i)];
    const VarId ew = r.confidence_w[static_cast<size_t>(i)];
    const VarId u = cfg.alignment_uncertainty ? alignment_uncertainty(t, fw, f_ref, e_ref) : -1;
    auto [reg, attn] = apply_attention(t, ap, fw, f_ref, u, ew, pooled_att);
    regulated[static_cast<size_t>(i)] = reg;
    r.attention[static_cast<size_t>(i)] = attn;
  }

  // Fusion and reconstruction.
  MergeParams mp;
  for (int b = 1; b <= cfg.rdb_blocks; ++b) {
    const std::string base = "merge.rdb" + std::to_string(b);
    RdbParams rp;
    for (int j = 0; j < cfg.rdb_layers; ++j) {
      rp.layer_w.push_back(P(base + ".l" + std::to_string(j) + ".w"));
      rp.layer_b.push_back(P(base + ".l" + std::to_string(j) + ".b"));
    }
    rp.fuse_w = P(base + ".fuse.w");
    rp.fuse_b = P(base + ".fuse.b");
    mp.rdbs.push_back(rp);
  }
  VarId fused;
  if (cfg.fusion == Fusion::MultiStageMax) {
    for (int b = 1; b <= cfg.rdb_blocks; ++b) {
      mp.share_w.push_back(P("merge.share" + std::to_string(b) + ".w"));
      mp.share_b.push_back(P("merge.share" + std::to_string(b) + ".b"));
    }
    fused = grdb_fuse(t, mp, regulated);
  } else {
    mp.concat_w = P("merge.concat.w");
    mp.concat_b = P("merge.concat.b");
    fused = concat_fuse(t, mp, regulated);
  }
  ReconstructParams rc{P("recon.conv1.w"), P("recon.conv1.b"), P("recon.conv2.w"), P("recon.conv2.b")};
  r.hdr = reconstruct(t, rc, fused, regulated[static_cast<size_t>(ref_index)]);
  return r;
}

}  // namespace flexhdr

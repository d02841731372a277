#pragma once

#include <vector>

#include "flexhdr/model.hpp"

namespace flexhdr {

// Fixed (non-trainable) feature stack standing in for a pretrained perceptual
// network: six 3x3 convs with taps after layers 2, 4 and 6. Weights come from
// one hard-coded seed, so every build and every run sees the same extractor.
template <typename T>
struct PerceptualExtractor {
  static constexpr std::uint64_t kSeed = 0x9e3779b97f4a7c15ull;
  static constexpr int kLayers = 6;
  static constexpr int kWidth = 12;

  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;

  static const PerceptualExtractor& instance() {
    static const PerceptualExtractor ext = make();
    return ext;
  }

  static PerceptualExtractor make() {
    PerceptualExtractor e;
    std::mt19937_64 rng(kSeed);
    int cin = 3;
    for (int l = 0; l < kLayers; ++l) {
      e.weights.push_back(uniform_conv_init<T>(Shape{3, 3, cin, kWidth}, rng));
      e.biases.push_back(Tensor<T>::zeros(Shape{kWidth}));
      cin = kWidth;
    }
    return e;
  }

  std::vector<VarId> taps(Tape<T>& t, VarId image) const {
    std::vector<VarId> out;
    VarId x = image;
    for (int l = 0; l < kLayers; ++l) {
      const VarId w = t.constant(weights[static_cast<size_t>(l)]);
      const VarId b = t.constant(biases[static_cast<size_t>(l)]);
      x = leaky_relu(t, conv2d(t, x, w, b));
      if (l % 2 == 1) out.push_back(x);
    }
    return out;
  }
};

template <typename T>
struct LossVars {
  VarId l_tm = -1;
  VarId l_phot = -1;
  VarId l_vgg = -1;
  VarId l_total = -1;
};

struct LossReport {
  double l_tm = 0, l_phot = 0, l_vgg = 0, l_total = 0;
};

inline constexpr double kPerceptualWeight = 1e-3;

// Tonemapped l1 between prediction and ground truth, both divided by the
// ground truth's 99th-percentile normaliser. The prediction side is left
// unclamped above 1 so over-range radiance keeps a gradient.
template <typename T>
VarId loss_tonemapped(Tape<T>& t, VarId pred_hdr, const Tensor<T>& gt_norm_tonemapped, T inv_norm) {
  const VarId pred_n = scale(t, pred_hdr, inv_norm);
  const VarId pred_tm = mu_tonemap(t, pred_n);
  const VarId gt = t.constant(gt_norm_tonemapped);
  return mean_all(t, abs_val(t, sub(t, pred_tm, gt)));
}

// Frozen copy of the photometric supervision target. Gradients are stopped
// through F_r and E_r in L_phot; a finite-difference check of the total loss
// must therefore hold these tensors fixed at the base point, which is what
// the optional override below enables.
template <typename T>
struct PhotometricTarget {
  Tensor<T> f_ref;
  Tensor<T> e_ref;
};

// Self-supervised photometric loss (per stream): mean of |F_i^w - F_r| o E_r.
// The reference features and confidence act as a supervision target, so their
// gradients are stopped.
template <typename T>
VarId loss_photometric_stream(Tape<T>& t, VarId f_warped, VarId f_ref_target, VarId e_ref_mask) {
  return mean_all(t, mul(t, abs_val(t, sub(t, f_warped, f_ref_target)), e_ref_mask));
}

// Averaged over non-reference streams; exact zero constant when there are none.
template <typename T>
VarId loss_photometric(Tape<T>& t, const ForwardResult<T>& fr,
                       const PhotometricTarget<T>* frozen = nullptr) {
  const VarId f_ref = frozen ? t.constant(frozen->f_ref)
                             : detach(t, fr.features_w[static_cast<size_t>(fr.ref_index)]);
  const VarId e_ref = frozen ? t.constant(frozen->e_ref)
                             : detach(t, fr.confidence_w[static_cast<size_t>(fr.ref_index)]);
  std::vector<VarId> per_stream;
  for (size_t i = 0; i < fr.features_w.size(); ++i) {
    if (static_cast<int>(i) == fr.ref_index) continue;
    per_stream.push_back(loss_photometric_stream(t, fr.features_w[i], f_ref, e_ref));
  }
  if (per_stream.empty()) return t.constant(Tensor<T>::scalar(T(0)));
  VarId sum = per_stream[0];
  for (size_t i = 1; i < per_stream.size(); ++i) sum = add(t, sum, per_stream[i]);
  return scale(t, sum, T(1) / static_cast<T>(per_stream.size()));
}

template <typename T>
PhotometricTarget<T> photometric_target(const Tape<T>& t, const ForwardResult<T>& fr) {
  return {t.value(fr.features_w[static_cast<size_t>(fr.ref_index)]),
          t.value(fr.confidence_w[static_cast<size_t>(fr.ref_index)])};
}

// Perceptual term: l1 over the extractor's taps of the tonemapped images.
template <typename T>
VarId loss_perceptual(Tape<T>& t, VarId pred_hdr, const Tensor<T>& gt_norm_tonemapped, T inv_norm,
                      const PerceptualExtractor<T>& ext) {
  const VarId pred_tm = mu_tonemap(t, scale(t, pred_hdr, inv_norm));
  const std::vector<VarId> pt = ext.taps(t, pred_tm);
  const std::vector<VarId> gt = ext.taps(t, t.constant(gt_norm_tonemapped));
  VarId sum = -1;
  for (size_t i = 0; i < pt.size(); ++i) {
    const VarId term = mean_all(t, abs_val(t, sub(t, pt[i], gt[i])));
    sum = sum < 0 ? term : add(t, sum, term);
  }
  return sum;
}

// L_total = L_tm + L_phot + 1e-3 * L_vgg.
template <typename T>
LossVars<T> build_losses(Tape<T>& t, const ForwardResult<T>& fr, const Tensor<T>& gt_radiance,
                         T norm, const PhotometricTarget<T>* frozen_phot = nullptr) {
  const T inv = norm > T(0) ? T(1) / norm : T(1);
  Tensor<T> gt_n(gt_radiance.shape());
  for (std::int64_t i = 0; i < gt_n.numel(); ++i)
    gt_n[i] = std::clamp(gt_radiance[i] * inv, T(0), T(1));
  const Tensor<T> gt_tm = [&] {
    Tensor<T> out(gt_n.shape());
    const T denom = std::log1p(T(5000));
    for (std::int64_t i = 0; i < gt_n.numel(); ++i) out[i] = std::log1p(T(5000) * gt_n[i]) / denom;
    return out;
  }();

  LossVars<T> lv;
  lv.l_tm = loss_tonemapped(t, fr.hdr, gt_tm, inv);
  lv.l_phot = loss_photometric(t, fr, frozen_phot);
  lv.l_vgg = loss_perceptual(t, fr.hdr, gt_tm, inv, PerceptualExtractor<T>::instance());
  lv.l_total = add(t, add(t, lv.l_tm, lv.l_phot), scale(t, lv.l_vgg, static_cast<T>(kPerceptualWeight)));
  return lv;
}

template <typename T>
LossReport report_losses(const Tape<T>& t, const LossVars<T>& lv) {
  LossReport r;
  r.l_tm = static_cast<double>(t.value(lv.l_tm)[0]);
  r.l_phot = static_cast<double>(t.value(lv.l_phot)[0]);
  r.l_vgg = static_cast<double>(t.value(lv.l_vgg)[0]);
  r.l_total = static_cast<double>(t.value(lv.l_total)[0]);
  return r;
}

}  // namespace flexhdr

#pragma once

#include "flexhdr/ops.hpp"

namespace flexhdr {

// Per-image exposure-confidence knees. Always satisfies 0 < alpha < 0.5 < beta < 1.
template <typename T>
struct ExposureParams {
  VarId alpha;  // 1x1x1
  VarId beta;   // 1x1x1
};

inline constexpr double kFixedAlpha = 1.0 / 3.0;
inline constexpr double kFixedBeta = 2.0 / 3.0;

// Piecewise linear confidence in a pixel's exposedness:
//   E = mean/alpha              below alpha,
//   E = 1                       on [alpha, beta],
//   E = (1 - mean)/(1 - beta)   above beta.
// mean_image is H x W x 1 in [0,1]; alpha and beta are scalar graph values so
// the knees stay learnable. Continuous at both knees, zero at 0 and 1.
template <typename T>
VarId exposure_confidence(Tape<T>& t, VarId mean_image, const ExposureParams<T>& p) {
  const Tensor<T>& m = t.value(mean_image);
  if (m.shape().ndim() != 3 || m.c() != 1)
    throw std::invalid_argument("exposure_confidence: mean image must be HxWx1, got " + m.shape().str());
  const T a = t.value(p.alpha)[0];
  const T b = t.value(p.beta)[0];
  Tensor<T> e(m.shape());
  for (std::int64_t i = 0; i < m.numel(); ++i) {
    const T x = m[i];
    if (x < a)
      e[i] = x / a;
    else if (x <= b)
      e[i] = T(1);
    else
      e[i] = (T(1) - x) / (T(1) - b);
  }
  const VarId alpha = p.alpha, beta = p.beta, mean = mean_image;
  return t.record(std::move(e), [alpha, beta, mean, a, b](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& m = tp.value(mean);
    Tensor<T>& ga = tp.grad(alpha);
    Tensor<T>& gb = tp.grad(beta);
    Tensor<T>& gm = tp.grad(mean);
    for (std::int64_t i = 0; i < m.numel(); ++i) {
      const T g = gy[i];
      if (g == T(0)) continue;
      const T x = m[i];
      if (x < a) {
        ga[0] += g * (-x / (a * a));
        gm[i] += g / a;
      } else if (x > b) {
        const T omb = T(1) - b;
        gb[0] += g * (T(1) - x) / (omb * omb);
        gm[i] += -g / omb;
      }
    }
  });
}

// Fixed (non-learnable) knees for the ablation baseline.
template <typename T>
ExposureParams<T> fixed_exposure_params(Tape<T>& t) {
  return {t.constant(Tensor<T>::full(Shape::hwc(1, 1, 1), static_cast<T>(kFixedAlpha))),
          t.constant(Tensor<T>::full(Shape::hwc(1, 1, 1), static_cast<T>(kFixedBeta)))};
}

// Learns the knees from image content: one conv over [X_i, mean], spatial
// average pooling to two logits, then squashing that enforces the ordering
// constraint by construction: alpha = 0.5*sigmoid(a), beta = 0.5 + 0.5*sigmoid(b).
template <typename T>
ExposureParams<T> predict_exposure_params(Tape<T>& t, VarId x, VarId mean_image, VarId weight, VarId bias) {
  const VarId cat = concat_c(t, {x, mean_image});
  const VarId logits = spatial_mean(t, conv2d(t, cat, weight, bias));
  const VarId a = slice_c(t, logits, 0, 1);
  const VarId b = slice_c(t, logits, 1, 2);
  const VarId alpha = scale(t, sigmoid(t, a), T(0.5));
  const VarId beta = add_scalar(t, scale(t, sigmoid(t, b), T(0.5)), T(0.5));
  return {alpha, beta};
}

}  // namespace flexhdr

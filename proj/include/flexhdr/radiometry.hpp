#pragma once

#include <cmath>

#include "flexhdr/image.hpp"
#include "flexhdr/tensor.hpp"

namespace flexhdr {

// L = I^gamma / t: undo the display gamma and the exposure so differently
// exposed frames of one scene land on a shared radiance scale.
template <typename T>
Tensor<T> linearize(const Tensor<T>& pixels, T exposure_time, T gamma = T(2.2)) {
  if (!(exposure_time > T(0))) throw DataError("linearize: exposure time must be > 0");
  Tensor<T> out(pixels.shape());
  for (std::int64_t i = 0; i < pixels.numel(); ++i)
    out[i] = std::pow(pixels[i], gamma) / exposure_time;
  return out;
}

inline Tensor<float> linearize(const LdrFrame& frame) {
  return linearize(frame.pixels, frame.exposure_time, frame.gamma);
}

// Data-space mu-law compression T(H) = log(1 + mu*H) / log(1 + mu).
// Expects values in [0,1]; negatives are rejected.
template <typename T>
Tensor<T> tonemap_mu(const Tensor<T>& h, T mu = T(5000)) {
  Tensor<T> out(h.shape());
  const T denom = std::log1p(mu);
  for (std::int64_t i = 0; i < h.numel(); ++i) {
    if (h[i] < T(0)) throw DataError("tonemap_mu: negative input");
    out[i] = std::log1p(mu * h[i]) / denom;
  }
  return out;
}

// q-th percentile (q in [0,100]) over all elements, by exact selection.
float percentile(const Tensor<float>& t, float q);

// Divide by the reference's 99th percentile and clamp to [0,1]. Both the
// prediction and the ground truth pass through this with the ground truth's
// normaliser before any tonemapping or PSNR.
Tensor<float> normalize_by_percentile(const Tensor<float>& t, float norm);

enum class PsnrDomain { Linear, Mu };

// 10*log10(1/MSE) for same-shape images in [0,1]; the mu domain tonemaps both
// sides first. Identical inputs report the 100 dB cap.
float psnr(const Tensor<float>& pred, const Tensor<float>& target, PsnrDomain domain);

inline constexpr float kPsnrCap = 100.0f;

}  // namespace flexhdr

#include "flexhdr/baseline.hpp"

#include "flexhdr/exposure.hpp"
#include "flexhdr/radiometry.hpp"

namespace flexhdr {

namespace {

float fixed_confidence(float mean) {
  const float a = static_cast<float>(kFixedAlpha);
  const float b = static_cast<float>(kFixedBeta);
  if (mean < a) return mean / a;
  if (mean <= b) return 1.0f;
  return (1.0f - mean) / (1.0f - b);
}

}  // namespace

HdrImage naive_exposure_weighted_merge(const FrameSet& fs) {
  fs.validate();
  const int n = fs.size();
  const int h = fs.frames[0].pixels.h(), w = fs.frames[0].pixels.w();

  std::vector<Tensor<float>> lin;
  lin.reserve(static_cast<size_t>(n));
  for (const LdrFrame& f : fs.frames) lin.push_back(linearize(f));

  HdrImage out;
  out.radiance = Tensor<float>(Shape::hwc(h, w, 3));
  const int r = fs.reference_index;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float wsum = 0.0f, acc[3] = {0, 0, 0};
      for (int i = 0; i < n; ++i) {
        const Tensor<float>& px = fs.frames[static_cast<size_t>(i)].pixels;
        const float mean = (px.at(y, x, 0) + px.at(y, x, 1) + px.at(y, x, 2)) / 3.0f;
        const float wgt = fixed_confidence(mean);
        wsum += wgt;
        for (int c = 0; c < 3; ++c) acc[c] += wgt * lin[static_cast<size_t>(i)].at(y, x, c);
      }
      for (int c = 0; c < 3; ++c)
        out.radiance.at(y, x, c) = wsum > 1e-6f ? acc[c] / wsum : lin[static_cast<size_t>(r)].at(y, x, c);
    }
  return out;
}

}  // namespace flexhdr

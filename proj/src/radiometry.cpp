#include "flexhdr/radiometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flexhdr {

float percentile(const Tensor<float>& t, float q) {
  if (t.numel() == 0) throw DataError("percentile: empty tensor");
  std::vector<float> v(t.data(), t.data() + t.numel());
  const auto k = static_cast<std::int64_t>(std::round((q / 100.0f) * static_cast<float>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[static_cast<size_t>(k)];
}

Tensor<float> normalize_by_percentile(const Tensor<float>& t, float norm) {
  Tensor<float> out(t.shape());
  const float inv = norm > 0.0f ? 1.0f / norm : 1.0f;
  for (std::int64_t i = 0; i < t.numel(); ++i) out[i] = std::clamp(t[i] * inv, 0.0f, 1.0f);
  return out;
}

float psnr(const Tensor<float>& pred, const Tensor<float>& target, PsnrDomain domain) {
  if (pred.shape() != target.shape())
    throw DataError("psnr: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
  const Tensor<float>* a = &pred;
  const Tensor<float>* b = &target;
  Tensor<float> ta, tb;
  if (domain == PsnrDomain::Mu) {
    ta = tonemap_mu(pred);
    tb = tonemap_mu(target);
    a = &ta;
    b = &tb;
  }
  double mse = 0.0;
  for (std::int64_t i = 0; i < a->numel(); ++i) {
    const double d = static_cast<double>((*a)[i]) - static_cast<double>((*b)[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a->numel());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, static_cast<float>(10.0 * std::log10(1.0 / mse)));
}

}  // namespace flexhdr

#include "flexhdr/synthetic.hpp"

#include <cmath>
#include <random>

#include "flexhdr/ops.hpp"

namespace flexhdr {

namespace {

Tensor<float> render_radiance(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  Tensor<float> r(Shape::hwc(size, size, 3));

  float grad_x[3], grad_y[3], floor_v[3];
  for (int c = 0; c < 3; ++c) {
    grad_x[c] = 0.15f * u01(rng);
    grad_y[c] = 0.15f * u01(rng);
    floor_v[c] = 0.02f + 0.05f * u01(rng);
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        r.at(y, x, c) = floor_v[c] + grad_x[c] * static_cast<float>(x) / static_cast<float>(size) +
                        grad_y[c] * static_cast<float>(y) / static_cast<float>(size);

  std::uniform_int_distribution<int> nblobs(8, 16);
  const int k = nblobs(rng);
  for (int b = 0; b < k; ++b) {
    const float cx = u01(rng) * static_cast<float>(size);
    const float cy = u01(rng) * static_cast<float>(size);
    const float sigma = 3.0f + u01(rng) * (static_cast<float>(size) / 4.0f - 3.0f);
    const float amp = 0.05f + 1.15f * u01(rng);
    float col[3];
    for (int c = 0; c < 3; ++c) col[c] = 0.2f + 0.8f * u01(rng);
    const float inv2s2 = 1.0f / (2.0f * sigma * sigma);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const float dx = static_cast<float>(x) - cx;
        const float dy = static_cast<float>(y) - cy;
        const float g = amp * std::exp(-(dx * dx + dy * dy) * inv2s2);
        for (int c = 0; c < 3; ++c) r.at(y, x, c) += g * col[c];
      }
  }
  return r;
}

// Samples the radiance field at positions displaced by -flow, i.e. renders a
// frame whose exact backward-warp alignment flow to the reference is `flow`.
Tensor<float> shift_radiance(const Tensor<float>& r, float dx, float dy) {
  if (dx == 0.0f && dy == 0.0f) return r;
  const int h = r.h(), w = r.w();
  Tensor<float> coords(Shape::hwc(h, w, 2));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      coords.at(y, x, 0) = static_cast<float>(x) - dx;
      coords.at(y, x, 1) = static_cast<float>(y) - dy;
    }
  Tensor<float> out(r.shape());
  bilinear_sample_data(r, coords, out);
  return out;
}

Tensor<float> expose(const Tensor<float>& radiance, float t, float noise_sigma, bool quantize,
                     std::mt19937_64& rng) {
  Tensor<float> img(radiance.shape());
  std::normal_distribution<float> noise(0.0f, noise_sigma);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    const float x = std::clamp(radiance[i] * t, 0.0f, 1.0f);
    float v = std::pow(x, 1.0f / 2.2f);
    if (quantize) v = std::round(v * 255.0f) / 255.0f;
    if (noise_sigma > 0.0f) v += noise(rng);
    img[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

Tensor<float> constant_flow(int h, int w, float dx, float dy) {
  Tensor<float> f(Shape::hwc(h, w, 2));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(y, x, 0) = dx;
      f.at(y, x, 1) = dy;
    }
  return f;
}

}  // namespace

Scene make_synthetic_scene(std::uint64_t seed, const SyntheticOptions& opt) {
  if (opt.ev_list.empty()) throw DataError("synthetic: empty EV list");
  const int n = static_cast<int>(opt.ev_list.size());
  int ref = opt.reference;
  if (ref < 0) {
    ref = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(opt.ev_list[static_cast<size_t>(i)]) < std::abs(opt.ev_list[static_cast<size_t>(ref)])) ref = i;
  }
  if (ref >= n) throw DataError("synthetic: reference index out of range");

  std::mt19937_64 rng(seed);
  const Tensor<float> radiance = render_radiance(rng, opt.size);

  if (!opt.shifts.empty() && static_cast<int>(opt.shifts.size()) != n)
    throw DataError("synthetic: shifts length does not match EV list");

  std::uniform_real_distribution<float> shift(-opt.max_shift, opt.max_shift);
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  Scene scene;
  scene.frame_set.reference_index = ref;
  for (int i = 0; i < n; ++i) {
    float dx = 0.0f, dy = 0.0f;
    if (!opt.shifts.empty()) {
      dx = opt.shifts[static_cast<size_t>(i)][0];
      dy = opt.shifts[static_cast<size_t>(i)][1];
    } else if (i != ref) {
      const bool moving = opt.motion == Motion::Translation ||
                          (opt.motion == Motion::Mixed && u01(rng) < 0.75f);
      // Draw both shifts regardless so the RNG stream does not depend on the
      // motion decision.
      const float sx = shift(rng), sy = shift(rng);
      if (moving) {
        dx = sx;
        dy = sy;
      }
    }
    const float t = std::exp2(opt.ev_list[static_cast<size_t>(i)]);
    LdrFrame frame;
    frame.exposure_time = t;
    frame.pixels = expose(shift_radiance(radiance, dx, dy), t, opt.noise_sigma, opt.quantize, rng);
    scene.frame_set.frames.push_back(std::move(frame));
    scene.gt_flows.push_back(constant_flow(opt.size, opt.size, dx, dy));
  }
  scene.ground_truth.radiance = radiance;
  return scene;
}

namespace {

Tensor<float> crop_t(const Tensor<float>& t, int y0, int x0, int size) {
  Tensor<float> out(Shape::hwc(size, size, t.c()));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < t.c(); ++c) out.at(y, x, c) = t.at(y0 + y, x0 + x, c);
  return out;
}

Tensor<float> flip_h(const Tensor<float>& t, bool flow) {
  Tensor<float> out(t.shape());
  const int h = t.h(), w = t.w(), c = t.c();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        float v = t.at(y, w - 1 - x, ch);
        if (flow && ch == 0) v = -v;
        out.at(y, x, ch) = v;
      }
  return out;
}

Tensor<float> flip_v(const Tensor<float>& t, bool flow) {
  Tensor<float> out(t.shape());
  const int h = t.h(), w = t.w(), c = t.c();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        float v = t.at(h - 1 - y, x, ch);
        if (flow && ch == 1) v = -v;
        out.at(y, x, ch) = v;
      }
  return out;
}

// Quarter turn taking (dx, dy) -> (-dy, dx): out(x, H-1-y) = in(y, x).
Tensor<float> rot90(const Tensor<float>& t, bool flow) {
  const int h = t.h(), w = t.w(), c = t.c();
  Tensor<float> out(Shape::hwc(w, h, c));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int yo = x, xo = h - 1 - y;
      if (flow) {
        out.at(yo, xo, 0) = -t.at(y, x, 1);
        out.at(yo, xo, 1) = t.at(y, x, 0);
      } else {
        for (int ch = 0; ch < c; ++ch) out.at(yo, xo, ch) = t.at(y, x, ch);
      }
    }
  return out;
}

}  // namespace

Scene augment(const Scene& scene, std::uint64_t seed, const AugmentOptions& opt) {
  const int h = scene.frame_set.frames[0].pixels.h();
  const int w = scene.frame_set.frames[0].pixels.w();
  std::mt19937_64 rng(seed);

  int y0 = 0, x0 = 0, crop = 0;
  if (opt.crop > 0) {
    if (opt.crop > h || opt.crop > w)
      throw DataError("augment: crop " + std::to_string(opt.crop) + " exceeds scene size");
    if (opt.crop < h || opt.crop < w) {
      crop = opt.crop;
      y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(h - crop + 1));
      x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(w - crop + 1));
    }
  }
  bool fh = false, fv = false;
  int rot = 0;
  if (opt.flips) {
    fh = (rng() & 1) != 0;
    fv = (rng() & 1) != 0;
  }
  if (opt.rotations) rot = static_cast<int>(rng() % 4);

  auto transform = [&](const Tensor<float>& t, bool flow) {
    Tensor<float> out = crop > 0 ? crop_t(t, y0, x0, crop) : t;
    if (fh) out = flip_h(out, flow);
    if (fv) out = flip_v(out, flow);
    for (int k = 0; k < rot; ++k) out = rot90(out, flow);
    return out;
  };

  Scene out;
  out.frame_set.reference_index = scene.frame_set.reference_index;
  for (const LdrFrame& f : scene.frame_set.frames) {
    LdrFrame g = f;
    g.pixels = transform(f.pixels, false);
    out.frame_set.frames.push_back(std::move(g));
  }
  if (scene.has_ground_truth()) out.ground_truth.radiance = transform(scene.ground_truth.radiance, false);
  for (const Tensor<float>& fl : scene.gt_flows) out.gt_flows.push_back(transform(fl, true));
  return out;
}

}  // namespace flexhdr

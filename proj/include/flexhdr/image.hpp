#pragma once

#include <string>
#include <vector>

#include "flexhdr/errors.hpp"
#include "flexhdr/tensor.hpp"

namespace flexhdr {

// One low-dynamic-range capture: gamma-encoded pixels in [0,1] plus the
// exposure time that produced them.
struct LdrFrame {
  Tensor<float> pixels;   // H x W x 3, [0, 1]
  float exposure_time = 1.0f;  // seconds, > 0
  float gamma = 2.2f;
};

// Linear nonnegative radiance.
struct HdrImage {
  Tensor<float> radiance;  // H x W x 3
};

// The unit of inference: an unordered set of frames plus the index of the
// frame whose geometry the output is aligned to.
struct FrameSet {
  std::vector<LdrFrame> frames;
  int reference_index = 0;

  int size() const { return static_cast<int>(frames.size()); }
  const LdrFrame& reference() const { return frames[static_cast<size_t>(reference_index)]; }

  void validate() const {
    if (frames.empty()) throw DataError("frame set: empty");
    if (reference_index < 0 || reference_index >= size())
      throw DataError("frame set: reference index " + std::to_string(reference_index) +
                      " out of range for " + std::to_string(size()) + " frames");
    const int h = frames[0].pixels.h(), w = frames[0].pixels.w();
    for (const LdrFrame& f : frames) {
      if (f.pixels.h() != h || f.pixels.w() != w)
        throw DataError("frame set: frames disagree on spatial size");
      if (!(f.exposure_time > 0.0f))
        throw DataError("frame set: exposure time must be positive");
    }
  }
};

// Binary 8-bit PPM (P6, maxval 255). Bytes scale to [0,1] on read.
Tensor<float> read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor<float>& pixels);

// Color PFM, float32 little-endian, scale field -1.0. Round-trips bit-exactly.
// Channel counts other than 3 are stored zero-padded to 3 on write and the
// reader returns all 3 channels.
Tensor<float> read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Tensor<float>& values);

}  // namespace flexhdr

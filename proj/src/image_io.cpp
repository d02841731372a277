#include "flexhdr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace flexhdr {

namespace {

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (std::isspace(ch)) continue;
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {}
      continue;
    }
    break;
  }
  if (ch == EOF) return tok;
  tok.push_back(static_cast<char>(ch));
  while ((ch = is.get()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(ch));
  return tok;
}

int parse_int(const std::string& tok, const char* what, const std::string& path) {
  if (tok.empty()) throw DataError(std::string("ppm: missing ") + what + " in " + path);
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw DataError(std::string("ppm: malformed ") + what + " '" + tok + "' in " + path);
  return std::stoi(tok);
}

}  // namespace

Tensor<float> read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("ppm: cannot open: " + path);
  std::string magic = next_token(is);
  if (magic != "P6") throw DataError("ppm: not a binary P6 file: " + path);
  const int w = parse_int(next_token(is), "width", path);
  const int h = parse_int(next_token(is), "height", path);
  const int maxval = parse_int(next_token(is), "maxval", path);
  if (maxval != 255) throw DataError("ppm: unsupported maxval " + std::to_string(maxval) + " in " + path);
  if (w <= 0 || h <= 0) throw DataError("ppm: bad dimensions in " + path);

  std::vector<std::uint8_t> raw(static_cast<size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(is.gcount()) != raw.size())
    throw DataError("ppm: truncated payload in " + path);

  Tensor<float> out(Shape::hwc(h, w, 3));
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<float>(raw[static_cast<size_t>(i)]) / 255.0f;
  return out;
}

void write_ppm(const std::string& path, const Tensor<float>& pixels) {
  if (pixels.shape().ndim() != 3 || pixels.c() != 3)
    throw DataError("ppm: expected HxWx3 pixels, got " + pixels.shape().str());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("ppm: cannot open for write: " + path);
  os << "P6\n" << pixels.w() << " " << pixels.h() << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<size_t>(pixels.numel()));
  for (std::int64_t i = 0; i < pixels.numel(); ++i) {
    const float v = std::clamp(pixels[i], 0.0f, 1.0f);
    raw[static_cast<size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw DataError("ppm: write failed: " + path);
}

Tensor<float> read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("pfm: cannot open: " + path);
  const std::string magic = next_token(is);
  if (magic != "PF") throw DataError("pfm: not a color PF file: " + path);
  const int w = parse_int(next_token(is), "width", path);
  const int h = parse_int(next_token(is), "height", path);
  const std::string scale_tok = next_token(is);
  if (scale_tok.empty()) throw DataError("pfm: missing scale in " + path);
  const float scale = std::stof(scale_tok);
  if (scale >= 0.0f) throw DataError("pfm: big-endian files unsupported: " + path);

  std::vector<float> raw(static_cast<size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (static_cast<size_t>(is.gcount()) != raw.size() * 4)
    throw DataError("pfm: truncated payload in " + path);

  // PFM stores rows bottom-up.
  Tensor<float> out(Shape::hwc(h, w, 3));
  for (int y = 0; y < h; ++y) {
    const float* src = raw.data() + static_cast<size_t>(h - 1 - y) * w * 3;
    std::copy(src, src + static_cast<size_t>(w) * 3, &out.at(y, 0, 0));
  }
  return out;
}

void write_pfm(const std::string& path, const Tensor<float>& values) {
  if (values.shape().ndim() != 3 || values.c() < 1 || values.c() > 3)
    throw DataError("pfm: expected HxWx{1..3} values, got " + values.shape().str());
  const int h = values.h(), w = values.w(), c = values.c();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("pfm: cannot open for write: " + path);
  os << "PF\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(w) * 3, 0.0f);
  for (int y = h - 1; y >= 0; --y) {
    if (c == 3) {
      std::copy(&values.at(y, 0, 0), &values.at(y, 0, 0) + static_cast<size_t>(w) * 3, row.data());
    } else {
      std::fill(row.begin(), row.end(), 0.0f);
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) row[static_cast<size_t>(x) * 3 + ch] = values.at(y, x, ch);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!os) throw DataError("pfm: write failed: " + path);
}

}  // namespace flexhdr

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "flexhdr/errors.hpp"
#include "flexhdr/tensor.hpp"

namespace flexhdr {

// All learnable parameters plus Adam moments and the step counter. Parameter
// names are unique; moments are zero tensors of matching shape from the start
// so a checkpoint round-trips byte-identically at any point in training.
template <typename T>
struct ModelState {
  std::map<std::string, Tensor<T>> params;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
  std::int64_t step = 0;

  Tensor<T>& add_param(const std::string& name, Tensor<T> value) {
    if (params.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    m[name] = Tensor<T>::zeros(value.shape());
    v[name] = Tensor<T>::zeros(value.shape());
    return params[name] = std::move(value);
  }

  bool has(const std::string& name) const { return params.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }

  template <typename U>
  ModelState<U> cast() const {
    ModelState<U> out;
    out.step = step;
    for (const auto& [k, t] : params) out.params[k] = t.template cast<U>();
    for (const auto& [k, t] : m) out.m[k] = t.template cast<U>();
    for (const auto& [k, t] : v) out.v[k] = t.template cast<U>();
    return out;
  }
};

// Bias-corrected Adam. Parameters without a matching gradient entry see a zero
// gradient, so their moments decay and the value stays put on the first step.
template <typename T>
void adam_step(ModelState<T>& state, const std::map<std::string, Tensor<T>>& grads, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T bc1 = static_cast<T>(1.0 - std::pow(static_cast<double>(beta1), t));
  const T bc2 = static_cast<T>(1.0 - std::pow(static_cast<double>(beta2), t));
  for (auto& [name, p] : state.params) {
    Tensor<T>& mm = state.m[name];
    Tensor<T>& vv = state.v[name];
    auto git = grads.find(name);
    const Tensor<T>* g = git != grads.end() ? &git->second : nullptr;
    if (g && (*g).shape() != p.shape())
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      const T gi = g ? (*g)[i] : T(0);
      mm[i] = beta1 * mm[i] + (T(1) - beta1) * gi;
      vv[i] = beta2 * vv[i] + (T(1) - beta2) * gi * gi;
      const T mhat = mm[i] / bc1;
      const T vhat = vv[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("checkpoint: truncated u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& os, const float* data, std::int64_t n) {
  static_assert(sizeof(float) == 4);
  // Assumes little-endian host floats, which holds everywhere this builds.
  os.write(reinterpret_cast<const char*>(data), n * 4);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'E', 'X', 'H', 'D', 'R', '1'};

// Checkpoint layout: magic "FLEXHDR1", u32 entry count, then per entry
// u32 name length, name bytes, u32 ndim, u32 dims[ndim], f32 data. Moments
// are stored under "<name>.m" / "<name>.v" and the step counter under "step".
// Entries are written in lexicographic name order, making save -> load ->
// save byte-identical.
inline void save_checkpoint(const std::string& path, const ModelState<float>& state) {
  std::map<std::string, const Tensor<float>*> entries;
  for (const auto& [k, t] : state.params) entries[k] = &t;
  for (const auto& [k, t] : state.m) entries[k + ".m"] = &t;
  for (const auto& [k, t] : state.v) entries[k + ".v"] = &t;
  Tensor<float> step_t = Tensor<float>::scalar(static_cast<float>(state.step));
  entries["step"] = &step_t;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open for write: " + path);
  os.write(kCheckpointMagic, 8);
  detail::write_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t->shape().ndim()));
    for (int d = 0; d < t->shape().ndim(); ++d)
      detail::write_u32(os, static_cast<std::uint32_t>(t->shape()[d]));
    detail::write_f32_le(os, t->data(), t->numel());
  }
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

inline ModelState<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  const std::uint32_t count = detail::read_u32(is);

  std::map<std::string, Tensor<float>> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!is) throw DataError("checkpoint: truncated name");
    const std::uint32_t ndim = detail::read_u32(is);
    if (ndim > 4) throw DataError("checkpoint: rank > 4 for " + name);
    int dims[4] = {0, 0, 0, 0};
    for (std::uint32_t d = 0; d < ndim; ++d) dims[d] = static_cast<int>(detail::read_u32(is));
    Tensor<float> t(Shape::from_dims(dims, static_cast<int>(ndim)));
    is.read(reinterpret_cast<char*>(t.data()), t.numel() * 4);
    if (!is) throw DataError("checkpoint: truncated data for " + name);
    entries[name] = std::move(t);
  }

  ModelState<float> state;
  for (auto& [name, t] : entries) {
    if (name == "step") {
      state.step = static_cast<std::int64_t>(t[0]);
    } else if (name.size() > 2 && name.compare(name.size() - 2, 2, ".m") == 0) {
      state.m[name.substr(0, name.size() - 2)] = std::move(t);
    } else if (name.size() > 2 && name.compare(name.size() - 2, 2, ".v") == 0) {
      state.v[name.substr(0, name.size() - 2)] = std::move(t);
    } else {
      state.params[name] = std::move(t);
    }
  }
  for (const auto& [name, t] : state.params) {
    if (!state.m.count(name)) state.m[name] = Tensor<float>::zeros(t.shape());
    if (!state.v.count(name)) state.v[name] = Tensor<float>::zeros(t.shape());
  }
  return state;
}

}  // namespace flexhdr

#include "flexhdr/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "flexhdr/gradcheck.hpp"
#include "flexhdr/losses.hpp"
#include "flexhdr/synthetic.hpp"
#include "flexhdr/train.hpp"

namespace flexhdr {

namespace {

using D = double;

// Reduces an op output to a scalar with fixed random weights so every output
// element influences the objective.
struct ScalarProbe {
  Tensor<D> weights;
  explicit ScalarProbe(Shape s, std::mt19937_64& rng) : weights(uniform_tensor<D>(s, -1.0, 1.0, rng)) {}

  VarId apply(Tape<D>& t, VarId v) const {
    const VarId w = t.constant(weights);
    return mean_all(t, mul(t, v, w));
  }
};

struct Case {
  std::string op, input;
  std::function<double(const Tensor<D>&)> f;  // forward at a point
  Tensor<D> point;
  Tensor<D> analytic;
};

// Builds the analytic gradient for `point` used as input index `probe_idx` of
// a graph builder, then wraps the same builder as a plain forward for FD.
template <typename Builder>
Case make_case(const std::string& op, const std::string& input, Tensor<D> point, Builder build) {
  Case c;
  c.op = op;
  c.input = input;
  c.point = point;
  {
    Tape<D> t;
    const VarId x = t.param(point, "x");
    const VarId y = build(t, x);
    t.backward(y);
    c.analytic = t.named_grads().at("x");
  }
  c.f = [build](const Tensor<D>& p) {
    Tape<D> t;
    const VarId x = t.constant(p);
    return t.value(build(t, x))[0];
  };
  return c;
}

void run_case(const Case& c, std::vector<OpCheck>& out) {
  const GradCheckReport rep = grad_check(c.f, c.point, c.analytic, kGradStep);
  OpCheck oc;
  oc.op = c.op;
  oc.input = c.input;
  oc.max_rel_err = rep.finite ? rep.max_rel_err : 1e9;
  oc.worst_coord = rep.finite ? rep.worst_coord : rep.nonfinite_coord;
  oc.passed = rep.ok(kGradTol);
  out.push_back(oc);
}

bool selected(const std::vector<std::string>& filter, const std::string& op) {
  return filter.empty() || std::find(filter.begin(), filter.end(), op) != filter.end();
}

void check_conv2d(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> x = uniform_tensor<D>(Shape::hwc(5, 5, 2), -1.0, 1.0, rng);
  const Tensor<D> w = uniform_tensor<D>(Shape{3, 3, 2, 4}, -0.5, 0.5, rng);
  const Tensor<D> b = uniform_tensor<D>(Shape{4}, -0.2, 0.2, rng);
  for (int stride = 1; stride <= 2; ++stride) {
    const int ho = detail::conv_out_extent(5, 1, 3, stride);
    ScalarProbe probe(Shape::hwc(ho, ho, 4), rng);
    const std::string tag = "conv2d" + std::string(stride == 2 ? "/s2" : "");
    run_case(make_case(tag, "input", x,
                       [&, stride](Tape<D>& t, VarId v) {
                         return probe.apply(t, conv2d(t, v, t.constant(w), t.constant(b), stride));
                       }),
             out);
    run_case(make_case(tag, "weight", w,
                       [&, stride](Tape<D>& t, VarId v) {
                         return probe.apply(t, conv2d(t, t.constant(x), v, t.constant(b), stride));
                       }),
             out);
    run_case(make_case(tag, "bias", b,
                       [&, stride](Tape<D>& t, VarId v) {
                         return probe.apply(t, conv2d(t, t.constant(x), t.constant(w), v, stride));
                       }),
             out);
  }
}

void check_activation(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  // Keep sample points away from the relu/leaky kink at zero.
  Tensor<D> x = uniform_tensor<D>(Shape::hwc(4, 4, 3), 0.05, 1.0, rng);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    if (i % 2 == 0) x[i] = -x[i];
  ScalarProbe probe(x.shape(), rng);
  const Act modes[] = {Act::Relu, Act::LeakyRelu, Act::Sigmoid};
  const char* names[] = {"activation/relu", "activation/leaky_relu", "activation/sigmoid"};
  for (int m = 0; m < 3; ++m) {
    const Act mode = modes[m];
    run_case(make_case(names[m], "input", x,
                       [&, mode](Tape<D>& t, VarId v) { return probe.apply(t, activation(t, v, mode)); }),
             out);
  }
}

void check_set_max(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  // Distinct values so the max has no ties.
  Tensor<D> a = uniform_tensor<D>(Shape::hwc(3, 3, 4), 0.0, 1.0, rng);
  Tensor<D> b = uniform_tensor<D>(Shape::hwc(3, 3, 4), 1.5, 2.5, rng);
  Tensor<D> c = uniform_tensor<D>(Shape::hwc(3, 3, 4), -2.0, -1.0, rng);
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (i % 3 == 0) std::swap(a[i], b[i]);
  ScalarProbe probe(a.shape(), rng);
  run_case(make_case("set_max", "stream0", a,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, set_max(t, {v, t.constant(b), t.constant(c)}));
                     }),
           out);
  run_case(make_case("set_max", "stream1", b,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, set_max(t, {t.constant(a), v, t.constant(c)}));
                     }),
           out);
}

void check_bilinear(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> img = uniform_tensor<D>(Shape::hwc(6, 6, 2), 0.0, 1.0, rng);
  // Strictly interior, non-integer sample positions.
  Tensor<D> coords(Shape::hwc(4, 4, 2));
  std::uniform_real_distribution<double> pos(0.3, 4.6);
  for (std::int64_t i = 0; i < coords.numel(); ++i) {
    double p = pos(rng);
    if (std::abs(p - std::round(p)) < 0.05) p += 0.1;
    coords[i] = p;
  }
  ScalarProbe probe(Shape::hwc(4, 4, 2), rng);
  run_case(make_case("bilinear_resample", "input", img,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, bilinear_resample(t, v, t.constant(coords)));
                     }),
           out);
  run_case(make_case("bilinear_resample", "coords", coords,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, bilinear_resample(t, t.constant(img), v));
                     }),
           out);
}

void check_spatial_mean(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> x = uniform_tensor<D>(Shape::hwc(5, 4, 3), -1.0, 1.0, rng);
  ScalarProbe probe(Shape::hwc(1, 1, 3), rng);
  run_case(make_case("spatial_mean", "input", x,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, spatial_mean(t, v)); }),
           out);
}

void check_elementwise(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> a = uniform_tensor<D>(Shape::hwc(4, 4, 3), 0.2, 1.0, rng);
  const Tensor<D> b = uniform_tensor<D>(Shape::hwc(4, 4, 3), 0.2, 1.0, rng);
  const Tensor<D> g = uniform_tensor<D>(Shape::hwc(4, 4, 1), 0.1, 0.9, rng);
  ScalarProbe probe(a.shape(), rng);
  run_case(make_case("mul", "lhs", a,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, mul(t, v, t.constant(b))); }),
           out);
  run_case(make_case("mul", "gate", g,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, mul(t, t.constant(a), v)); }),
           out);
  run_case(make_case("add", "lhs", a,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, add(t, v, t.constant(b))); }),
           out);
  run_case(make_case("sub", "rhs", b,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, sub(t, t.constant(a), v)); }),
           out);
  Tensor<D> nz = a;
  for (std::int64_t i = 0; i < nz.numel(); ++i)
    if (i % 2 == 0) nz[i] = -nz[i];
  run_case(make_case("abs", "input", nz,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, abs_val(t, v)); }),
           out);
  run_case(make_case("scale_per_channel", "input", a,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, scale_per_channel(t, v, {2.0, -1.5, 0.5}));
                     }),
           out);
}

void check_concat_slice(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> a = uniform_tensor<D>(Shape::hwc(3, 3, 2), -1.0, 1.0, rng);
  const Tensor<D> b = uniform_tensor<D>(Shape::hwc(3, 3, 3), -1.0, 1.0, rng);
  ScalarProbe probe(Shape::hwc(3, 3, 2), rng);
  run_case(make_case("concat_slice", "part0", a,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, slice_c(t, concat_c(t, {v, t.constant(b)}), 1, 3));
                     }),
           out);
  run_case(make_case("concat_slice", "part1", b,
                     [&](Tape<D>& t, VarId v) {
                       return probe.apply(t, slice_c(t, concat_c(t, {t.constant(a), v}), 1, 3));
                     }),
           out);
}

void check_mu_tonemap(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> x = uniform_tensor<D>(Shape::hwc(4, 4, 3), 0.01, 1.0, rng);
  ScalarProbe probe(x.shape(), rng);
  run_case(make_case("mu_tonemap", "input", x,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, mu_tonemap(t, v)); }),
           out);
}

void check_exposure_confidence(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  // Means kept clear of the knees so the finite step cannot cross a segment
  // boundary.
  Tensor<D> mean(Shape::hwc(4, 4, 1));
  std::uniform_real_distribution<double> lo(0.02, 0.20), mid(0.30, 0.70), hi(0.80, 0.98);
  for (std::int64_t i = 0; i < mean.numel(); ++i)
    mean[i] = i % 3 == 0 ? lo(rng) : (i % 3 == 1 ? mid(rng) : hi(rng));
  const Tensor<D> alpha = Tensor<D>::full(Shape::hwc(1, 1, 1), 0.25);
  const Tensor<D> beta = Tensor<D>::full(Shape::hwc(1, 1, 1), 0.75);
  ScalarProbe probe(mean.shape(), rng);
  run_case(make_case("exposure_confidence", "alpha", alpha,
                     [&](Tape<D>& t, VarId v) {
                       ExposureParams<D> p{v, t.constant(beta)};
                       return probe.apply(t, exposure_confidence(t, t.constant(mean), p));
                     }),
           out);
  run_case(make_case("exposure_confidence", "beta", beta,
                     [&](Tape<D>& t, VarId v) {
                       ExposureParams<D> p{t.constant(alpha), v};
                       return probe.apply(t, exposure_confidence(t, t.constant(mean), p));
                     }),
           out);
  run_case(make_case("exposure_confidence", "mean", mean,
                     [&](Tape<D>& t, VarId v) {
                       ExposureParams<D> p{t.constant(alpha), t.constant(beta)};
                       return probe.apply(t, exposure_confidence(t, v, p));
                     }),
           out);
}

void check_warp_upsample(std::mt19937_64& rng, std::vector<OpCheck>& out) {
  const Tensor<D> img = uniform_tensor<D>(Shape::hwc(8, 8, 3), 0.0, 1.0, rng);
  Tensor<D> flow = uniform_tensor<D>(Shape::hwc(8, 8, 2), -1.3, 1.3, rng);
  for (std::int64_t i = 0; i < flow.numel(); ++i)
    if (std::abs(flow[i] - std::round(flow[i])) < 0.05) flow[i] += 0.11;
  ScalarProbe probe(img.shape(), rng);
  run_case(make_case("warp", "flow", flow,
                     [&](Tape<D>& t, VarId v) { return probe.apply(t, warp(t, t.constant(img), v)); }),
           out);
  const Tensor<D> coarse = uniform_tensor<D>(Shape::hwc(2, 2, 2), -0.8, 0.8, rng);
  ScalarProbe probe2(Shape::hwc(8, 8, 2), rng);
  run_case(make_case("upsample_flow", "coarse", coarse,
                     [&](Tape<D>& t, VarId v) { return probe2.apply(t, upsample_flow(t, v, 8, 8)); }),
           out);
}

// End-to-end: full loss on a 4-frame 8x8 scene, probing a deterministic
// sample of coordinates from every parameter tensor. The initial state is
// noise-perturbed so flows are generic (no sample sits on a bilinear kink).
void check_end_to_end(std::uint64_t seed, std::vector<OpCheck>& out) {
  SyntheticOptions sopt;
  sopt.size = 8;
  sopt.ev_list = ev_bracket(4);
  sopt.reference = ev_reference(4);
  sopt.motion = Motion::Translation;
  sopt.max_shift = 1.3f;
  const Scene scene = make_synthetic_scene(seed + 17, sopt);

  ModelConfig mc;
  mc.flow_iters = 2;
  ModelState<D> state;
  init_model(state, mc, seed);
  std::mt19937_64 rng(seed + 5);
  std::normal_distribution<double> jitter(0.0, 0.02);
  for (auto& [name, p] : state.params)
    for (std::int64_t i = 0; i < p.numel(); ++i) p[i] += jitter(rng);

  const auto inputs = make_set_inputs<D>(scene.frame_set);
  const double norm = static_cast<double>(percentile(scene.ground_truth.radiance, 99.0f));
  const Tensor<D> gt = scene.ground_truth.radiance.cast<D>();
  const int ref = scene.frame_set.reference_index;

  std::map<std::string, Tensor<D>> grads;
  PhotometricTarget<D> frozen;
  {
    Tape<D> t;
    ParamVars<D> P(t, state);
    ForwardResult<D> fr = forward_hdr(t, P, mc, inputs, ref);
    LossVars<D> lv = build_losses(t, fr, gt, norm);
    t.backward(lv.l_total);
    grads = t.named_grads();
    // L_phot stops gradients through its supervision target, so the FD
    // function below must hold the target at the base-point values.
    frozen = photometric_target(t, fr);
  }

  for (const auto& [name, p] : state.params) {
    std::vector<std::int64_t> coords;
    const int want = static_cast<int>(std::min<std::int64_t>(2, p.numel()));
    for (int k = 0; k < want; ++k)
      coords.push_back(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(p.numel())));

    const std::string pname = name;
    auto f = [&, pname](const Tensor<D>& point) {
      ModelState<D> s2 = state;
      s2.params[pname] = point;
      Tape<D> t;
      ParamVars<D> P(t, s2);
      ForwardResult<D> fr = forward_hdr(t, P, mc, inputs, ref);
      LossVars<D> lv = build_losses(t, fr, gt, norm, &frozen);
      return t.value(lv.l_total)[0];
    };
    const GradCheckReport rep = grad_check(f, p, grads.at(name), kGradStep, &coords);
    OpCheck oc;
    oc.op = "end_to_end";
    oc.input = name;
    oc.max_rel_err = rep.finite ? rep.max_rel_err : 1e9;
    oc.worst_coord = rep.finite ? rep.worst_coord : rep.nonfinite_coord;
    oc.passed = rep.ok(kGradTol);
    out.push_back(oc);
  }
}

}  // namespace

std::vector<std::string> gradient_suite_ops() {
  return {"conv2d",      "activation",   "set_max",     "bilinear_resample",
          "spatial_mean", "elementwise", "concat_slice", "mu_tonemap",
          "exposure_confidence", "warp", "end_to_end"};
}

std::vector<OpCheck> run_gradient_suite(const std::vector<std::string>& ops_filter, std::uint64_t seed) {
  std::vector<OpCheck> out;
  std::mt19937_64 rng(seed);
  if (selected(ops_filter, "conv2d")) check_conv2d(rng, out);
  if (selected(ops_filter, "activation")) check_activation(rng, out);
  if (selected(ops_filter, "set_max")) check_set_max(rng, out);
  if (selected(ops_filter, "bilinear_resample")) check_bilinear(rng, out);
  if (selected(ops_filter, "spatial_mean")) check_spatial_mean(rng, out);
  if (selected(ops_filter, "elementwise")) check_elementwise(rng, out);
  if (selected(ops_filter, "concat_slice")) check_concat_slice(rng, out);
  if (selected(ops_filter, "mu_tonemap")) check_mu_tonemap(rng, out);
  if (selected(ops_filter, "exposure_confidence")) check_exposure_confidence(rng, out);
  if (selected(ops_filter, "warp")) check_warp_upsample(rng, out);
  if (selected(ops_filter, "end_to_end")) check_end_to_end(seed, out);
  return out;
}

}  // namespace flexhdr

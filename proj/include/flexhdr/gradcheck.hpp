#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "flexhdr/tensor.hpp"

namespace flexhdr {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::int64_t worst_coord = -1;
  bool finite = true;
  std::int64_t nonfinite_coord = -1;

  bool ok(double tol) const { return finite && max_rel_err < tol; }
};

// Compares an analytic gradient against central finite differences of the
// scalar function f at `point`, perturbing one coordinate at a time. The
// relative error is |analytic - fd| / max(1, |analytic|). When `coords` is
// given only those coordinates are probed; otherwise all of them. Run in f64.
template <typename F>
GradCheckReport grad_check(F&& f, Tensor<double> point, const Tensor<double>& analytic, double h,
                           const std::vector<std::int64_t>* coords = nullptr) {
  GradCheckReport rep;
  std::vector<std::int64_t> all;
  if (!coords) {
    all.resize(static_cast<size_t>(point.numel()));
    for (std::int64_t i = 0; i < point.numel(); ++i) all[static_cast<size_t>(i)] = i;
    coords = &all;
  }
  for (std::int64_t i : *coords) {
    const double orig = point[i];
    point[i] = orig + h;
    const double fp = f(point);
    point[i] = orig - h;
    const double fm = f(point);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      rep.finite = false;
      rep.nonfinite_coord = i;
      return rep;
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_coord = i;
    }
  }
  return rep;
}

}  // namespace flexhdr

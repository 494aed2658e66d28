#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace skyrelay {

/// A function that may be undefined at a probe; it signals that by returning a
/// non-finite value or by throwing.
using ScalarFunction = std::function<double(const std::vector<double>&)>;

struct FdGradient {
  std::vector<double> value;
  std::vector<bool> defined;  // false when a probe around that coordinate failed

  bool all_defined() const {
    for (bool d : defined)
      if (!d) return false;
    return true;
  }
};

struct FdHessian {
  std::vector<std::vector<double>> value;
  std::vector<std::vector<bool>> defined;

  bool all_defined() const {
    for (const auto& row : defined)
      for (bool d : row)
        if (!d) return false;
    return true;
  }
};

namespace detail {

inline bool probe(const ScalarFunction& f, const std::vector<double>& x, double& out) {
  try {
    out = f(x);
  } catch (...) {
    return false;
  }
  return std::isfinite(out);
}

/// rel·max(|x_i|, floor), falling back to rel when both are zero.
inline double fd_step(double xi, double rel, double floor) {
  const double m = std::max(std::abs(xi), floor);
  return rel * (m > 0.0 ? m : 1.0);
}

}  // namespace detail

/// Central differences with step h_i = rel_step·max(|x_i|, abs_floor).
inline FdGradient finite_diff_gradient(const ScalarFunction& f, const std::vector<double>& x, double rel_step = 1e-5,
                                       double abs_floor = 0.0) {
  FdGradient g;
  g.value.assign(x.size(), 0.0);
  g.defined.assign(x.size(), false);
  std::vector<double> y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = detail::fd_step(x[i], rel_step, abs_floor);
    double fp = 0.0, fm = 0.0;
    y[i] = x[i] + h;
    const bool okp = detail::probe(f, y, fp);
    y[i] = x[i] - h;
    const bool okm = detail::probe(f, y, fm);
    y[i] = x[i];
    if (okp && okm) {
      g.value[i] = (fp - fm) / (2.0 * h);
      g.defined[i] = true;
    }
  }
  return g;
}

/// Second central differences; mixed entries use the four-point stencil.
inline FdHessian finite_diff_hessian(const ScalarFunction& f, const std::vector<double>& x, double rel_step = 1e-4,
                                     double abs_floor = 0.0) {
  const std::size_t n = x.size();
  FdHessian H;
  H.value.assign(n, std::vector<double>(n, 0.0));
  H.defined.assign(n, std::vector<bool>(n, false));
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i)
    h[i] = detail::fd_step(x[i], rel_step, abs_floor);
  double f0;
  if (!detail::probe(f, x, f0)) return H;
  std::vector<double> y = x;
  for (std::size_t i = 0; i < n; ++i) {
    double fp = 0.0, fm = 0.0;
    y[i] = x[i] + h[i];
    const bool okp = detail::probe(f, y, fp);
    y[i] = x[i] - h[i];
    const bool okm = detail::probe(f, y, fm);
    y[i] = x[i];
    if (okp && okm) {
      H.value[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
      H.defined[i][i] = true;
    }
    for (std::size_t j = 0; j < i; ++j) {
      double fpp = 0.0, fpm = 0.0, fmp = 0.0, fmm = 0.0;
      bool ok = true;
      y[i] = x[i] + h[i];
      y[j] = x[j] + h[j];
      ok &= detail::probe(f, y, fpp);
      y[j] = x[j] - h[j];
      ok &= detail::probe(f, y, fpm);
      y[i] = x[i] - h[i];
      ok &= detail::probe(f, y, fmm);
      y[j] = x[j] + h[j];
      ok &= detail::probe(f, y, fmp);
      y[i] = x[i];
      y[j] = x[j];
      if (ok) {
        const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
        H.value[i][j] = H.value[j][i] = v;
        H.defined[i][j] = H.defined[j][i] = true;
      }
    }
  }
  return H;
}

}  // namespace skyrelay

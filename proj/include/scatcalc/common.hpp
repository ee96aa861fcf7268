#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace scatcalc {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Bad user input (grid sizes, config values). Maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A mathematical precondition failed (non-elliptic symbol, degenerate radial point, ...).
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double jp(double t) { return std::sqrt(1.0 + t * t); }

inline double norm2(const Vec3& v, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return s;
}

inline double jp(const Vec3& v, int n) { return std::sqrt(1.0 + norm2(v, n)); }

inline double dot(const Vec3& a, const Vec3& b, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// chi0(t) = exp(-digamma/t) for t > 0, zero otherwise; chi0' = digamma chi0 / t^2.
inline double chi0(double t, double digamma = 1.0) {
  return t > 0 ? std::exp(-digamma / t) : 0.0;
}

// Smooth monotone step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  double a = chi0(t), b = chi0(1 - t);
  return a / (a + b);
}

inline double smooth_step_deriv(double t) {
  if (t <= 0 || t >= 1) return 0;
  double a = chi0(t), b = chi0(1 - t);
  double da = a / (t * t), db = -b / ((1 - t) * (1 - t));
  return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

// 1 on |t| <= inner, 0 on |t| >= outer, smooth and monotone in |t| between.
inline double plateau(double t, double inner, double outer) {
  double s = (outer - std::abs(t)) / (outer - inner);
  return smooth_step(s);
}

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need >= 2 matching points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

// Slope of log y against log x.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_line(lx, ly);
}

struct QuadRule {
  std::vector<double> nodes, weights;
};

// Gauss-Legendre on [-1, 1], Newton iteration on P_n.
inline QuadRule gauss_legendre(int n) {
  QuadRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1, p1 = z;
      dp = n * (z * p1 - p0) / (z * z - 1);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
    }
    double w = 2.0 / ((1 - z * z) * dp * dp);
    q.nodes[i] = -z;
    q.nodes[n - 1 - i] = z;
    q.weights[i] = q.weights[n - 1 - i] = w;
  }
  return q;
}

inline QuadRule gauss_legendre(int n, double a, double b) {
  QuadRule q = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    q.nodes[i] = 0.5 * (a + b) + 0.5 * (b - a) * q.nodes[i];
    q.weights[i] *= 0.5 * (b - a);
  }
  return q;
}

// Central difference for the k-th derivative of f at 0 with step h, then one Richardson pass.
template <class T, class F>
T central_derivative(F&& f, int k, double h) {
  auto stencil = [&](double step) {
    T acc{};
    double binom = 1;
    for (int j = 0; j <= k; ++j) {
      double sgn = (j % 2) ? -1.0 : 1.0;
      acc += sgn * binom * f((0.5 * k - j) * step);
      binom = binom * (k - j) / (j + 1);
    }
    return acc / std::pow(step, k);
  };
  if (k == 0) return f(0.0);
  T coarse = stencil(h), fine = stencil(h / 2);
  return (4.0 * fine - coarse) / 3.0;
}

// First derivative with two Richardson passes (O(h^6)).
template <class T, class F>
T derivative6(F&& f, double h) {
  auto d = [&](double s) { return (f(s) - f(-s)) / (2 * s); };
  T d1 = d(h), d2 = d(h / 2), d3 = d(h / 4);
  T e1 = (4.0 * d2 - d1) / 3.0, e2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * e2 - e1) / 15.0;
}

}  // namespace scatcalc

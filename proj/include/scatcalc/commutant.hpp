#pragma once

#include <random>

#include "hamilton.hpp"

namespace scatcalc {

namespace detail {

// 0 for t <= lo, 1 for t >= hi
inline double rise(double t, double lo, double hi) { return smooth_step((t - lo) / (hi - lo)); }
inline double rise_deriv(double t, double lo, double hi) { return smooth_step_deriv((t - lo) / (hi - lo)) / (hi - lo); }

// Fourth-order central difference.
template <class F>
double deriv5(F&& f, double t, double h) {
  return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h);
}

}  // namespace detail

// ---- model propagation estimate for D_{x1} on R^2 ----------------------------

// chi_1: 1 on [-1, 2], supported in [-2, 3]; chi_2: 1 on [-1, 1], supported in [-2, 2].
struct ModelPropagationSymbols {
  static double chi1(double t) { return detail::rise(t, -2, -1) * (1 - detail::rise(t, 2, 3)); }
  static double chi1_deriv(double t) {
    return detail::rise_deriv(t, -2, -1) * (1 - detail::rise(t, 2, 3)) - detail::rise(t, -2, -1) * detail::rise_deriv(t, 2, 3);
  }
  static double chi2(double t) { return plateau(t, 1, 2); }

  static double a(double x1, double x2) { return chi1(x1) * chi2(x2) * std::exp(-x1); }
  static double b(double x1, double x2) {
    double turnoff = x1 >= 0 ? chi1_deriv(x1) * std::exp(-x1) * chi2(x2) : 0.0;
    return a(x1, x2) - turnoff;
  }
  static double e(double x1, double x2) { return x1 <= 0 ? chi1_deriv(x1) * std::exp(-x1) * chi2(x2) : 0.0; }
};

struct ModelEstimateSample {
  double bu = 0, eu = 0, f2 = 0;  // <bu,u>, <eu,u>, ||f||^2
  double rhs() const { return 2 * eu + 36 * f2; }
  bool holds() const { return bu <= rhs(); }
};

// Random smooth u = sum of Gaussian bumps with f = D_{x1} u exact; integrals by the
// trapezoid rule on [-L, L]^2 with N points per axis.
inline std::vector<ModelEstimateSample> model_estimate_check(int samples, unsigned seed, double L = 4, int N = 161) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> cen(-3, 3), wid(0.2, 1.2), amp(-1, 1), phase(0, 2 * pi), freq(-3, 3);
  const double h = 2 * L / (N - 1);
  std::vector<ModelEstimateSample> out;
  for (int s = 0; s < samples; ++s) {
    struct Bump {
      double cx, cy, w, ar, ai, kx;
    };
    std::vector<Bump> bumps(1 + rng() % 5);
    for (auto& bp : bumps) bp = {cen(rng), cen(rng), wid(rng), amp(rng), amp(rng), freq(rng)};
    ModelEstimateSample m;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        double x1 = -L + i * h, x2 = -L + j * h;
        double w = (i == 0 || i == N - 1 ? 0.5 : 1.0) * (j == 0 || j == N - 1 ? 0.5 : 1.0) * h * h;
        cplx u = 0, du = 0;
        for (auto& bp : bumps) {
          double g = std::exp(-((x1 - bp.cx) * (x1 - bp.cx) + (x2 - bp.cy) * (x2 - bp.cy)) / (2 * bp.w * bp.w));
          cplx c = cplx(bp.ar, bp.ai) * std::exp(I * bp.kx * x1) * g;
          u += c;
          du += c * (I * bp.kx - (x1 - bp.cx) / (bp.w * bp.w));
        }
        double u2 = std::norm(u);
        m.bu += w * ModelPropagationSymbols::b(x1, x2) * u2;
        m.eu += w * ModelPropagationSymbols::e(x1, x2) * u2;
        m.f2 += w * std::norm(du);  // |D_{x1} u| = |d_{x1} u|
      }
    out.push_back(m);
  }
  return out;
}

// ---- propagation commutant ---------------------------------------------------

struct CommutantParams {
  double s0 = 1;
  double eps = 0.25;
  double digamma = 10;  // <= 0: 10x the sup of the competing terms
  double s = 0, r = 0;  // orders
  std::function<double(const Vec3&, const Vec3&)> p1;  // defaults to 0
  double xi1 = 1;       // fibre point the chart sits over
};

struct CommutantBundle {
  Symbol a, b, e_prime, g;
  double digamma = 0;
  CommutantParams params;
  double residual_sup = 0;
  double min_sqrt_argument = 0;
  int escalations = 0;
  bool e_prime_in_turn_on = true;
  size_t grid_points = 0;
};

// Model p = xi_1 on R^2, where H_p = d_{x1}: chart z_1 = x_1, z' = (x_2, xi_2).
// a = W chi(z_1) chi_1(z_1)^2 psi(z')^2 with chi(z_1) = chi0(s0 + eps - z_1) and
// W = <xi>^{2s}<x>^{2r}. With p1 replaced by p1 + W^{-1} H_p W the identity
//   H_p a + p1 a = -b^2 - W^{-1} a^2 + e'
// holds exactly (W = 1 gives the order (0,0) identity).
inline CommutantBundle build_propagation_commutant(const CommutantParams& prm) {
  if (!(prm.s0 > 0) || !(prm.eps > 0)) throw ConfigError("commutant: s0 and eps must be positive");
  const double s0 = prm.s0, eps = prm.eps, s = prm.s, r = prm.r;
  auto p1 = prm.p1 ? prm.p1 : [](const Vec3&, const Vec3&) { return 0.0; };
  auto W = [s, r](const Vec3& x, const Vec3& k) { return std::pow(jp(k, 2), 2 * s) * std::pow(jp(x, 2), 2 * r); };
  // W^{-1} d_{x1} W = 2 r x_1 / <x>^2
  auto p1_eff = [p1, r](const Vec3& x, const Vec3& k) { return p1(x, k) + 2 * r * x[0] / (1 + x[0] * x[0] + x[1] * x[1]); };

  auto T = [s0, eps](double z1) { return s0 + eps - z1; };
  auto chi1 = [eps](double z1) { return detail::rise(z1, -eps, eps); };
  auto chi1d = [eps](double z1) { return detail::rise_deriv(z1, -eps, eps); };
  auto psi = [eps](const Vec3& x, const Vec3& k) {
    double zp = std::sqrt(x[1] * x[1] + k[1] * k[1]);
    return plateau(zp, eps, 2 * eps);
  };

  // grid over the support neighbourhood
  std::vector<std::pair<Vec3, Vec3>> grid;
  {
    const int n1 = 81, n2 = 13;
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j)
        for (int l = 0; l < n2; ++l) {
          double z1 = -2 * eps + (s0 + 4 * eps) * i / (n1 - 1);
          double x2 = -2.5 * eps + 5 * eps * j / (n2 - 1);
          double k2 = -2.5 * eps + 5 * eps * l / (n2 - 1);
          grid.push_back({{z1, x2, 0}, {prm.xi1, k2, 0}});
        }
  }

  // sqrt argument of b0: digamma - T^2 (p1_eff + chi chi1^2 psi^2) on supp chi chi1 psi
  auto min_argument = [&](double dg) {
    double m = INFINITY;
    for (auto& [x, k] : grid) {
      double t = T(x[0]), c1 = chi1(x[0]), ps = psi(x, k);
      if (!(t > 0) || c1 == 0 || ps == 0) continue;
      double arg = dg - t * t * (p1_eff(x, k) + chi0(t, dg) * c1 * c1 * ps * ps);
      m = std::min(m, arg);
    }
    return m;
  };

  double dg = prm.digamma;
  if (!(dg > 0)) {
    double comp = 0;
    for (auto& [x, k] : grid) {
      double t = T(x[0]);
      if (t > 0 && chi1(x[0]) > 0 && psi(x, k) > 0) comp = std::max(comp, t * t * (std::abs(p1_eff(x, k)) + 1));
    }
    dg = 10 * comp;
  }
  int esc = 0;
  double marg = min_argument(dg);
  while (marg < 1e-6 && esc < 3) {
    dg *= 4;
    ++esc;
    marg = min_argument(dg);
  }
  if (marg < 1e-6)
    throw PreconditionError("commutant: square-root argument is not positive on the support; increase digamma (tried " +
                            std::to_string(dg) + ")");

  CommutantBundle cb;
  cb.digamma = dg;
  cb.params = prm;
  cb.escalations = esc;
  cb.min_sqrt_argument = marg;
  auto a0 = [=](const Vec3& x, const Vec3& k) {
    double c1 = chi1(x[0]), ps = psi(x, k);
    return chi0(T(x[0]), dg) * c1 * c1 * ps * ps;
  };
  auto b0 = [=](const Vec3& x, const Vec3& k) {
    double t = T(x[0]);
    if (!(t > 0)) return 0.0;
    double c1 = chi1(x[0]), ps = psi(x, k);
    if (c1 == 0 || ps == 0) return 0.0;
    // sqrt(chi0(t)/t^2) = exp(-digamma/(2t))/t
    double arg = dg - t * t * (p1_eff(x, k) + a0(x, k));
    return std::exp(-dg / (2 * t)) / t * c1 * ps * std::sqrt(std::max(arg, 0.0));
  };
  auto e0 = [=](const Vec3& x, const Vec3& k) {
    double ps = psi(x, k);
    return 2 * chi1(x[0]) * chi1d(x[0]) * chi0(T(x[0]), dg) * ps * ps;
  };
  const double m_ord = 2 * s, l_ord = 2 * r;
  cb.a = make_symbol(2, [=](const Vec3& x, const Vec3& k) { return cplx(W(x, k) * a0(x, k)); }, m_ord, l_ord);
  cb.b = make_symbol(2, [=](const Vec3& x, const Vec3& k) { return cplx(std::sqrt(W(x, k)) * b0(x, k)); }, s, r);
  cb.e_prime = make_symbol(2, [=](const Vec3& x, const Vec3& k) { return cplx(W(x, k) * e0(x, k)); }, m_ord, l_ord);
  cb.g = make_symbol(2, [=](const Vec3& x, const Vec3& k) {
    double zp = std::sqrt(x[1] * x[1] + k[1] * k[1]);
    return cplx(detail::rise(x[0], -2 * eps, -eps) * (1 - detail::rise(x[0], s0 + eps, s0 + 2 * eps)) * plateau(zp, 2 * eps, 3 * eps));
  }, 0, 0);

  // pointwise residual of H_p a + p1 a + b^2 + W^{-1} a^2 - e'
  double res = 0;
  const double h = 2e-4;
  for (auto& [x, k] : grid) {
    auto av = [&](double z1) {
      Vec3 y = x;
      y[0] = z1;
      return cb.a(y, k).real();
    };
    double Hpa = detail::deriv5(av, x[0], h);
    double a = cb.a(x, k).real(), b = cb.b(x, k).real(), e = cb.e_prime(x, k).real();
    double lhs = Hpa + p1(x, k) * a;
    double rhs = -b * b - a * a / W(x, k) + e;
    res = std::max(res, std::abs(lhs - rhs));
    if (e != 0 && std::abs(x[0]) >= eps) cb.e_prime_in_turn_on = false;
  }
  cb.residual_sup = res;
  cb.grid_points = grid.size();
  return cb;
}

// ---- radial commutant at the Helmholtz outgoing set ---------------------------

struct RadialCommutantParams {
  double lambda = 1;
  double r = -1;
  double delta = 0.05;
  double eps = 0.25;     // supports: phi on |p| < eps, psi on varrho < eps
  double digamma = 1;    // shape parameter of the chi0-built cutoffs
};

struct RadialCommutantReport {
  double residual_sup = 0;
  bool below_threshold = true;
  bool e_term_discardable = false;  // above threshold b^2 and e^2 share a sign
  double min_sqrt_argument = 0;
  double b_ellipticity = 0;         // min |b| rho^r near the radial set
  size_t grid_points = 0;
};

// Helmholtz n = 2 in the chart x_1 > 0 where R_out = {rho = 0, v = 0, |xi| = lambda, xi_1 > 0},
// v = xi_2/xi_1 - y. With the rescaled field F of the chart, beta0 = F_rho/rho, the
// squared defining function varrho = v^2 and p the chart symbol,
//   a = rho^{-(2r+1)} phi(p)^2 psi(varrho)^2,
//   b = rho^{-r} phi psi sqrt(beta0 (2r+1 - 2 delta phi^2 psi^2 / beta0)),
//   e = rho^{-r} phi sqrt(2 (H varrho) psi' psi),  h = 2 rho^{-2r} q phi' phi psi^2,
// and H_p a = rho H a satisfies H_p a = -2 delta rho^{2r+2} a^2 - b^2 + e^2 + h p below
// threshold; above threshold the b and delta terms flip sign.
inline RadialCommutantReport radial_commutant_check(const RadialCommutantParams& prm) {
  if (std::abs(2 * prm.r + 1) < 1e-12)
    throw PreconditionError("radial commutant: r = -1/2 is the threshold, 2r + 1 = 0 gives no positivity");
  if (!(prm.delta > 0)) throw ConfigError("radial commutant: delta must be positive");
  const auto H = models::helmholtz(2, prm.lambda);
  const double r = prm.r, delta = prm.delta, eps = prm.eps, lam = prm.lambda;
  const bool below = r < -0.5;

  // coordinates (rho, y, xi_1, xi_2) of the spatial chart x_1 > 0
  auto field = [&](const std::array<double, 4>& z) {
    PhasePointChart p;
    p.kind = ChartKind::spatial;
    p.n = 2;
    p.c = {z[0], z[1], z[2], z[3], 0, 0};
    return boundary_chart_field(H, p).v;
  };
  auto psym = [&](const std::array<double, 4>& z) { return z[2] * z[2] + z[3] * z[3] - lam * lam; };
  auto varrho = [](const std::array<double, 4>& z) {
    double v = z[3] / z[2] - z[1];
    return v * v;
  };
  // cutoffs: 1 near 0, supported in [0, eps) (psi) or |.| < eps (phi); psi' <= 0
  auto psi = [&](double t) { return 1 - detail::rise(t, eps / 2, eps); };
  auto psid = [&](double t) { return -detail::rise_deriv(t, eps / 2, eps); };
  auto phi = [&](double t) { return plateau(t, eps / 2, eps); };
  auto phid = [&](double t) {
    double a = std::abs(t);
    double d = -detail::rise_deriv(a, eps / 2, eps);
    return t < 0 ? -d : d;
  };

  auto a_of = [&](const std::array<double, 4>& z) {
    double ph = phi(psym(z)), ps = psi(varrho(z));
    return std::pow(z[0], -(2 * r + 1)) * ph * ph * ps * ps;
  };
  // directional derivative along the chart field
  auto Hf = [&](auto&& f, const std::array<double, 4>& z) {
    auto F = field(z);
    auto along = [&](double t) {
      std::array<double, 4> w = z;
      for (int i = 0; i < 4; ++i) w[i] += t * F[i];
      return f(w);
    };
    return detail::deriv5(along, 0.0, 2e-4);
  };

  RadialCommutantReport rep;
  rep.below_threshold = below;
  rep.e_term_discardable = !below;
  rep.min_sqrt_argument = INFINITY;
  rep.b_ellipticity = INFINITY;
  double res = 0;
  const int nr = 9, ny = 15, nk = 15;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k1 = 0; k1 < nk; ++k1)
        for (int k2 = 0; k2 < nk; ++k2) {
          std::array<double, 4> z{0.02 + 0.3 * i / (nr - 1), -0.6 + 1.2 * j / (ny - 1), lam * (0.55 + 0.8 * k1 / (nk - 1)),
                                  lam * (-0.6 + 1.2 * k2 / (nk - 1))};
          const double rho = z[0];
          auto F = field(z);
          const double beta0 = F[0] / rho;
          const double p = psym(z), vr = varrho(z);
          const double ph = phi(p), ps = psi(vr);
          // q with H p = q p (zero for Helmholtz: xi is constant along the flow)
          const double Hp_p = Hf(psym, z);
          const double q = std::abs(p) > 1e-12 ? Hp_p / p : 0.0;
          const double Hvr = Hf(varrho, z);
          const double a = a_of(z);
          double barg = below ? beta0 * (2 * r + 1) - 2 * delta * ph * ph * ps * ps
                              : -beta0 * (2 * r + 1) - 2 * delta * ph * ph * ps * ps;
          double earg = 2 * Hvr * psid(vr) * ps;
          if (ph * ps != 0) rep.min_sqrt_argument = std::min(rep.min_sqrt_argument, barg);
          if (ph * ps != 0 && barg < 0)
            throw PreconditionError("radial commutant: square root of a negative argument; shrink the supports or delta");
          if (earg < -1e-12) throw PreconditionError("radial commutant: H varrho psi' psi has the wrong sign; shrink the supports");
          double b = std::pow(rho, -r) * ph * ps * std::sqrt(std::max(barg, 0.0));
          double e = std::pow(rho, -r) * ph * std::sqrt(std::max(earg, 0.0));
          double hterm = 2 * std::pow(rho, -2 * r) * q * phid(p) * ph * ps * ps * p;
          double Hpa = rho * Hf(a_of, z);
          double rhs = below ? -2 * delta * std::pow(rho, 2 * r + 2) * a * a - b * b + e * e + hterm
                             : 2 * delta * std::pow(rho, 2 * r + 2) * a * a + b * b + e * e + hterm;
          double scale = std::max(1.0, std::pow(rho, -2 * r));
          res = std::max(res, std::abs(Hpa - rhs) / scale);
          if (vr < eps / 4 && std::abs(p) < eps / 4) rep.b_ellipticity = std::min(rep.b_ellipticity, std::abs(b) * std::pow(rho, r));
          ++rep.grid_points;
        }
  rep.residual_sup = res;
  return rep;
}

}  // namespace scatcalc

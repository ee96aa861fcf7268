#pragma once

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <optional>
#include <random>

#include "common.hpp"

namespace scatcalc {

struct Potential1D {
  std::function<double(double)> eval;
  double support_radius = 0;      // |V| < 1e-12 beyond
  std::vector<double> breaks;     // jump locations; the integrator restarts there
  std::string smoothness = "smooth";

  double operator()(double x) const { return std::abs(x) > support_radius ? 0.0 : eval(x); }

  static Potential1D zero() { return {[](double) { return 0.0; }, 0, {}, "smooth"}; }

  // Outermost point with |V| >= 1e-12 on a step-h scan of [-search, search].
  static double detect_support(const std::function<double(double)>& v, double search = 1e3, double h = 1e-2) {
    double L = 0;
    for (double x = search; x > 0; x -= h)
      if (std::abs(v(x)) >= 1e-12 || std::abs(v(-x)) >= 1e-12) {
        L = x + h;
        break;
      }
    return L;
  }

  static Potential1D from_function(std::function<double(double)> v, double search = 1e3) {
    double L = detect_support(v, search);
    return {std::move(v), L, {}, "smooth"};
  }

  static Potential1D square_barrier(double height, double width) {
    return {[=](double x) { return std::abs(x) <= width / 2 ? height : 0.0; }, width / 2, {-width / 2, width / 2},
            "piecewise"};
  }
};

// C^infinity bump exp(1 - 1/(1 - s^2)) on |s| < 1, peak 1.
inline double smooth_bump(double s) { return std::abs(s) >= 1 ? 0.0 : std::exp(1 - 1 / (1 - s * s)); }

inline Potential1D random_bump_potential(unsigned seed, int bumps = 3, double L = 4) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> c(-L / 2, L / 2), w(0.5, L / 2), a(-1.5, 1.5);
  std::vector<std::array<double, 3>> p;
  for (int k = 0; k < bumps; ++k) p.push_back({a(rng), c(rng), w(rng)});
  double R = 0;
  for (auto& q : p) R = std::max(R, std::abs(q[1]) + q[2]);
  return {[p](double x) {
            double v = 0;
            for (auto& q : p) v += q[0] * smooth_bump((x - q[1]) / q[2]);
            return v;
          },
          R, {}, "smooth"};
}

struct ScatterPath {
  std::vector<double> x;
  std::vector<cplx> psi, dpsi;
};

struct ScatterCoeffs {
  double lambda = 1;
  cplx r = 0, t = 1;
  double unitarity_defect = 0;
  ScatterPath path;

  ScatterCoeffs() = default;
  ScatterCoeffs(double l, cplx rr, cplx tt, ScatterPath p = {})
      : lambda(l), r(rr), t(tt), unitarity_defect(std::abs(std::norm(rr) + std::norm(tt) - 1)), path(std::move(p)) {}
};

struct ScatterOptions {
  double tol = 1e-12;  // local error, absolute and relative
  double sample_step = 0.05;  // path samples for Wronskian checks
};

// (D_x^2 + V - lambda^2) psi = 0 with psi = t e^{i lambda x} for x > L and
// psi = e^{i lambda x} + r e^{-i lambda x} for x < -L. Integrates psi = e^{i lambda x} backwards
// from x = L and normalizes at the end.
inline ScatterCoeffs solve_scatter(const Potential1D& V, double lambda, const ScatterOptions& opt = {}) {
  if (!(lambda > 0)) throw std::invalid_argument("solve_scatter: lambda must be > 0");
  namespace ode = boost::numeric::odeint;
  using State = std::array<double, 4>;  // Re psi, Im psi, Re psi', Im psi'
  const double L = V.support_radius;
  const cplx e = std::exp(I * (lambda * L));
  State s{e.real(), e.imag(), (I * lambda * e).real(), (I * lambda * e).imag()};
  ScatterPath path;
  auto record = [&](const State& y, double x) {
    path.x.push_back(x);
    path.psi.emplace_back(y[0], y[1]);
    path.dpsi.emplace_back(y[2], y[3]);
  };
  if (L > 0) {
    auto rhs = [&](const State& y, State& dy, double x) {
      double q = V.eval(x) - lambda * lambda;
      dy[0] = y[2];
      dy[1] = y[3];
      dy[2] = q * y[0];
      dy[3] = q * y[1];
    };
    std::vector<double> knots{L};
    std::vector<double> br = V.breaks;
    std::sort(br.rbegin(), br.rend());
    for (double b : br)
      if (b < L && b > -L) knots.push_back(b);
    knots.push_back(-L);
    auto stepper = ode::make_dense_output(opt.tol, opt.tol, ode::runge_kutta_dopri5<State>());
    record(s, L);
    for (size_t k = 0; k + 1 < knots.size(); ++k) {
      double a = knots[k], b = knots[k + 1];
      if (a - b < 1e-14) continue;
      // sample points strictly inside, ending exactly at b
      std::vector<double> grid{a};
      for (double x = a - opt.sample_step; x > b + 1e-12; x -= opt.sample_step) grid.push_back(x);
      grid.push_back(b);
      // evaluate the potential from inside the piece so jumps are seen from the right side
      auto piece = [&, a, b](const State& y, State& dy, double x) { rhs(y, dy, std::clamp(x, b + 1e-13, a - 1e-13)); };
      bool first = true;
      try {
        ode::integrate_times(stepper, piece, s, grid.begin(), grid.end(), -std::min(0.01, (a - b) / 4),
                             [&](const State& y, double x) {
                               if (first) {
                                 first = false;
                                 return;
                               }
                               record(y, x);
                             });
      } catch (const std::exception& ex) {
        throw NumericalError(std::string("solve_scatter: integrator failure: ") + ex.what());
      }
    }
  } else {
    record(s, L);
  }
  const double x0 = -L;
  cplx psi(s[0], s[1]), dpsi(s[2], s[3]);
  cplx A = (psi + dpsi / (I * lambda)) / 2.0 * std::exp(-I * (lambda * x0));
  cplx B = (psi - dpsi / (I * lambda)) / 2.0 * std::exp(I * (lambda * x0));
  if (!std::isfinite(std::abs(A)) || std::abs(A) == 0) throw NumericalError("solve_scatter: degenerate incoming amplitude");
  for (auto& p : path.psi) p /= A;
  for (auto& p : path.dpsi) p /= A;
  return ScatterCoeffs(lambda, B / A, 1.0 / A, std::move(path));
}

// Square barrier of height v0 on [-a/2, a/2] by matching plane waves across both edges.
// Returns (r, t).
inline std::pair<cplx, cplx> square_barrier_matching(double v0, double a, double lambda) {
  const cplx k = std::sqrt(cplx(v0 - lambda * lambda, 0));
  const double xl = -a / 2, xr = a / 2;
  auto ep = [&](double x) { return std::exp(I * (lambda * x)); };
  auto em = [&](double x) { return std::exp(-I * (lambda * x)); };
  // unknowns r, C, D, t with psi = C e^{kx} + D e^{-kx} inside
  Eigen::Matrix4cd M;
  Eigen::Vector4cd b;
  M << em(xl), -std::exp(k * xl), -std::exp(-k * xl), 0.0,
      -I * lambda * em(xl), -k * std::exp(k * xl), k * std::exp(-k * xl), 0.0,
      0.0, std::exp(k * xr), std::exp(-k * xr), -ep(xr),
      0.0, k * std::exp(k * xr), -k * std::exp(-k * xr), -I * lambda * ep(xr);
  b << -ep(xl), -I * lambda * ep(xl), 0.0, 0.0;
  Eigen::Vector4cd s = M.fullPivLu().solve(b);
  return {s[0], s[3]};
}

// max |J(x) - J(x0)| with J = conj(psi) psi' - psi conj(psi').
inline double wronskian_drift(const ScatterPath& p) {
  if (p.psi.empty()) return 0;
  auto J = [&](size_t k) { return std::conj(p.psi[k]) * p.dpsi[k] - p.psi[k] * std::conj(p.dpsi[k]); };
  const cplx j0 = J(0);
  double d = 0;
  for (size_t k = 1; k < p.psi.size(); ++k) d = std::max(d, std::abs(J(k) - j0));
  return d;
}

// ---- Liouville-Green profiles for D_x^2 + eps x^k --------------------------------

// u = |x|^{-k/4} exp(sigma S(|x|)), S = 2|x|^{(k+2)/2}/(k+2), sigma^2 = eps sign(x)^k.
// branch +1/-1 picks the sign of sigma (the decaying branch is -1 on the exponential side).
struct LGProfile {
  int k = 4;
  int eps = -1;
  int branch = 1;
  int side = 1;  // sign of x

  cplx sigma() const {
    int s2 = eps * ((k % 2 && side < 0) ? -1 : 1);
    return s2 < 0 ? cplx(0, branch) : cplx(branch, 0);
  }
  bool oscillatory() const { return sigma().real() == 0; }

  // u, u', u'' at x (x must lie on `side`)
  std::array<cplx, 3> eval(double x) const {
    const double t = std::abs(x);
    const cplx sg = sigma();
    const cplx u = std::pow(t, -k / 4.0) * std::exp(sg * (2 * std::pow(t, (k + 2) / 2.0) / (k + 2)));
    const cplx ut = u * (-k / (4 * t) + sg * std::pow(t, k / 2.0));
    const cplx utt = u * (sg * sg * std::pow(t, k) + (k * k / 16.0 + k / 4.0) / (t * t));
    const double d = x < 0 ? -1 : 1;
    return {u, d * ut, utt};
  }

  // (D_x^2 + eps x^k - lambda) u / u with the x^k terms cancelled symbolically
  cplx residual_ratio(double x, cplx lambda) const {
    const double t = std::abs(x);
    const cplx sg = sigma();
    const int sgn = (k % 2 && x < 0) ? -1 : 1;
    const cplx lead = double(eps * sgn) - sg * sg;  // exactly zero for the profile
    return lead * std::pow(t, k) - (k * k / 16.0 + k / 4.0) / (t * t) - lambda;
  }
};

// Side of the real line where eps x^k < 0 (the profile oscillates), if any.
inline std::optional<int> lg_oscillatory_side(int k, int eps) {
  if (eps < 0) return 1;
  if (k % 2) return -1;
  return std::nullopt;
}

struct LGReport {
  int k = 0, eps = 0;
  int side = 1;
  bool oscillatory = true;
  std::vector<double> x, residual;  // |(D^2 + eps x^k - lambda) u| / |x^k u|
  LineFit fit;
  bool square_integrable = false;
  double tail_mass = 0;             // int_{x_min}^inf |u|^2, infinity when divergent
};

inline LGReport lg_profile_residual(int k, int eps, cplx lambda, double x_min = 10, double x_max = 1000, int samples = 25) {
  if (k < 1) throw std::invalid_argument("lg_profile_residual: k must be >= 1");
  if (eps != 1 && eps != -1) throw std::invalid_argument("lg_profile_residual: eps must be +-1");
  if (!(x_min >= 10 && x_max <= 1000 && x_min < x_max)) throw std::invalid_argument("lg_profile_residual: range must lie in [10, 1000]");
  LGReport rep;
  rep.k = k;
  rep.eps = eps;
  auto osc = lg_oscillatory_side(k, eps);
  rep.side = osc.value_or(1);
  LGProfile prof{k, eps, osc ? 1 : -1, rep.side};
  rep.oscillatory = prof.oscillatory();
  for (int j = 0; j < samples; ++j) {
    double t = x_min * std::pow(x_max / x_min, double(j) / (samples - 1));
    double x = rep.side * t;
    rep.x.push_back(t);
    rep.residual.push_back(std::abs(prof.residual_ratio(x, lambda)) / std::pow(t, k));
  }
  rep.fit = fit_loglog(rep.x, rep.residual);
  // |u|^2 = t^{-k/2} on the oscillatory side; the exponential branch always decays
  if (rep.oscillatory) {
    rep.square_integrable = k > 2;
    rep.tail_mass = k > 2 ? std::pow(x_min, 1 - k / 2.0) / (k / 2.0 - 1) : INFINITY;
  } else {
    rep.square_integrable = true;
    rep.tail_mass = NAN;
  }
  return rep;
}

// A function with its first derivative.
using Profile1D = std::function<std::pair<cplx, cplx>(double)>;

// LG eigen-profile of D_x^2 + x^3: oscillatory for x < 0, superpolynomially decaying for x > 0.
inline Profile1D lg_cubic_profile() {
  return [](double x) -> std::pair<cplx, cplx> {
    if (x == 0) return {0, 0};
    LGProfile p{3, 1, x < 0 ? 1 : -1, x < 0 ? -1 : 1};
    auto v = p.eval(x);
    return {v[0], v[1]};
  };
}

// <Au, u> - <u, Au> = [conj(u) u' - conj(u') u] evaluated between -R and R, up to sign.
inline cplx symmetry_boundary_term(const Profile1D& u, double R) {
  auto B = [&](double x) {
    auto [v, dv] = u(x);
    return std::conj(v) * dv - std::conj(dv) * v;
  };
  return B(R) - B(-R);
}

}  // namespace scatcalc

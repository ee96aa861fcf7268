#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>

#include "mass.hpp"

namespace scatcalc {

// Density on S^{n-1}; for eigenfunctions eval(theta) plays the role of f_hat(lambda theta).
struct SphereDensity {
  int n = 2;
  std::function<cplx(const Vec3&)> eval;
  int degree = 64;  // nodes per great circle for norms and projections

  cplx operator()(const Vec3& w) const { return eval(w); }
  SphereQuadrature quadrature() const { return SphereQuadrature::make(n, degree); }

  static SphereDensity constant(int n, cplx c) { return {n, [c](const Vec3&) { return c; }}; }
};

inline double sphere_l2_norm(const SphereDensity& f) {
  auto q = f.quadrature();
  return std::sqrt(q.integrate([&](const Vec3& w) { return std::norm(f(w)); }));
}

inline cplx sphere_inner(const SphereDensity& f, const SphereDensity& g) {
  auto q = SphereQuadrature::make(f.n, std::max(f.degree, g.degree));
  return q.integrate([&](const Vec3& w) { return f(w) * std::conj(g(w)); });
}

// Smooth bump on the cap {w . c > cos(angle)}.
inline SphereDensity cap_density(int n, const Vec3& centre, double angle, cplx amp = 1) {
  const double c0 = std::cos(angle);
  return {n,
          [=](const Vec3& w) {
            double t = (dot(w, centre, n) - c0) / (1 - c0);
            return amp * smooth_step(t);
          },
          std::max(64, static_cast<int>(96 / angle))};
}

// ---- harmonic coefficients ---------------------------------------------------

// Band-limited density: Fourier modes e^{i m phi}, |m| <= L (n = 2) or real spherical
// harmonics Y_{l m}, l <= L (n = 3).
struct HarmonicDensity {
  int n = 2;
  int L = 0;
  std::vector<cplx> coeffs;

  size_t size() const { return n == 2 ? 2 * L + 1 : (L + 1) * (L + 1); }

  // (l, m) of a flat index; n = 2 uses l = |m|
  std::pair<int, int> lm(size_t idx) const {
    if (n == 2) {
      int m = static_cast<int>(idx) - L;
      return {std::abs(m), m};
    }
    int l = static_cast<int>(std::sqrt(static_cast<double>(idx)));
    while ((l + 1) * (l + 1) <= static_cast<int>(idx)) ++l;
    while (l * l > static_cast<int>(idx)) --l;
    return {l, static_cast<int>(idx) - l * l - l};
  }

  static cplx basis(int n, int l, int m, const Vec3& w) {
    if (n == 2) return std::exp(I * (m * std::atan2(w[1], w[0]))) / std::sqrt(2 * pi);
    double theta = std::acos(std::clamp(w[2], -1.0, 1.0)), phi = std::atan2(w[1], w[0]);
    int am = std::abs(m);
    double p = std::sph_legendre(l, am, theta);
    if (m == 0) return p;
    return std::sqrt(2.0) * p * (m > 0 ? std::cos(am * phi) : std::sin(am * phi));
  }

  // eigenvalue of the positive Laplacian on S^{n-1}
  double laplace_eigen(size_t idx) const {
    auto [l, m] = lm(idx);
    return n == 2 ? double(m) * m : double(l) * (l + 1);
  }

  cplx operator()(const Vec3& w) const {
    cplx s = 0;
    for (size_t k = 0; k < coeffs.size(); ++k) {
      if (coeffs[k] == cplx(0)) continue;
      auto [l, m] = lm(k);
      s += coeffs[k] * basis(n, l, m, w);
    }
    return s;
  }

  HarmonicDensity laplacian() const {
    HarmonicDensity h = *this;
    for (size_t k = 0; k < coeffs.size(); ++k) h.coeffs[k] *= laplace_eigen(k);
    return h;
  }

  SphereDensity as_density() const {
    auto self = *this;
    return {n, [self](const Vec3& w) { return self(w); }, std::max(64, 4 * L + 8)};
  }

  static HarmonicDensity project(const SphereDensity& f, int L) {
    if (f.n != 2 && f.n != 3) throw std::invalid_argument("harmonic projection: n must be 2 or 3");
    HarmonicDensity h{f.n, L, {}};
    h.coeffs.assign(h.size(), 0);
    auto q = SphereQuadrature::make(f.n, std::max(f.degree, 4 * L + 8));
    std::vector<cplx> vals(q.size());
    for (size_t i = 0; i < q.size(); ++i) vals[i] = f(q.nodes[i]);
    for (size_t k = 0; k < h.size(); ++k) {
      auto [l, m] = h.lm(k);
      cplx s = 0;
      for (size_t i = 0; i < q.size(); ++i) s += q.weights[i] * vals[i] * std::conj(basis(f.n, l, m, q.nodes[i]));
      h.coeffs[k] = s;
    }
    return h;
  }
};

// ---- generalized eigenfunctions ----------------------------------------------

struct EigenfunctionOptions {
  int min_nodes = 48;
  int max_nodes = 1 << 13;
};

inline int eigenfunction_nodes(double lambda, double r, const EigenfunctionOptions& opt = {}, int density_degree = 0) {
  int m = std::max({opt.min_nodes, density_degree, 4 + 2 * static_cast<int>(std::ceil(lambda * r))});
  if (m > opt.max_nodes)
    throw NumericalError("eigenfunction: sphere quadrature under-resolved (need " + std::to_string(m) + " nodes per circle)");
  return m;
}

// u(x) = (2 pi)^{-n} lambda^{n-1} int_S e^{i lambda x.theta} f(theta) dtheta. The density is
// tabulated once per node count (rounded up to a multiple of 16) and reused.
class Eigenfunction {
 public:
  Eigenfunction(SphereDensity f, double lambda, EigenfunctionOptions opt = {})
      : f_(std::move(f)), lambda_(lambda), opt_(opt) {
    if (!(lambda > 0)) throw std::invalid_argument("eigenfunction: lambda must be positive");
  }

  const SphereDensity& density() const { return f_; }
  double lambda() const { return lambda_; }

  // value and radial derivative
  std::pair<cplx, cplx> with_dr(const Vec3& x) const {
    const int n = f_.n;
    const double r = std::sqrt(norm2(x, n));
    int m = eigenfunction_nodes(lambda_, r, opt_, f_.degree);
    m = std::min(opt_.max_nodes, (m + 15) / 16 * 16);
    const Table& t = table(m);
    Vec3 xh{0, 0, 0};
    if (r > 0)
      for (int i = 0; i < n; ++i) xh[i] = x[i] / r;
    cplx u = 0, du = 0;
    for (size_t k = 0; k < t.q.size(); ++k) {
      const Vec3& th = t.q.nodes[k];
      cplx v = t.wf[k] * std::exp(I * (lambda_ * dot(x, th, n)));
      u += v;
      du += I * lambda_ * dot(xh, th, n) * v;
    }
    const double c = std::pow(2 * pi, -n) * std::pow(lambda_, n - 1);
    return {c * u, c * du};
  }

  cplx operator()(const Vec3& x) const { return with_dr(x).first; }

 private:
  struct Table {
    SphereQuadrature q;
    std::vector<cplx> wf;  // weight * density
  };
  const Table& table(int m) const {
    auto it = cache_.find(m);
    if (it != cache_.end()) return it->second;
    Table t{SphereQuadrature::make(f_.n, m), {}};
    t.wf.resize(t.q.size());
    for (size_t k = 0; k < t.q.size(); ++k) t.wf[k] = t.q.weights[k] * f_(t.q.nodes[k]);
    return cache_.emplace(m, std::move(t)).first->second;
  }

  SphereDensity f_;
  double lambda_;
  EigenfunctionOptions opt_;
  mutable std::map<int, Table> cache_;
};

inline std::pair<cplx, cplx> eigenfunction_with_dr(const SphereDensity& f, double lambda, const Vec3& x,
                                                   const EigenfunctionOptions& opt = {}) {
  return Eigenfunction(f, lambda, opt).with_dr(x);
}

inline cplx eigenfunction(const SphereDensity& f, double lambda, const Vec3& x, const EigenfunctionOptions& opt = {}) {
  return eigenfunction_with_dr(f, lambda, x, opt).first;
}

// Prefactor of the stationary-phase leading term, lambda^{n-1} included.
inline double stationary_phase_constant(int n, double lambda) {
  return std::pow(2 * pi, -n) * std::pow(2 * pi / lambda, (n - 1) / 2.0) * std::pow(lambda, n - 1);
}

inline cplx stationary_phase_leading(const SphereDensity& f, double lambda, const Vec3& x) {
  const int n = f.n;
  const double r = std::sqrt(norm2(x, n));
  if (r * lambda < 5) throw std::invalid_argument("stationary_phase_leading: need |x| >= 5/lambda");
  Vec3 xh{0, 0, 0}, mxh{0, 0, 0};
  for (int i = 0; i < n; ++i) {
    xh[i] = x[i] / r;
    mxh[i] = -xh[i];
  }
  const double ph = pi * (n - 1) / 4;
  cplx s = std::exp(-I * ph) * std::exp(I * (lambda * r)) * f(xh) + std::exp(I * ph) * std::exp(-I * (lambda * r)) * f(mxh);
  return stationary_phase_constant(n, lambda) * s / std::pow(r, (n - 1) / 2.0);
}

struct AsymptoticProfile {
  SphereDensity f_plus, f_minus;
  double lambda = 1;
};

// u ~ r^{-(n-1)/2}(e^{i lambda r} f_+ + e^{-i lambda r} f_-), read off the leading term.
inline AsymptoticProfile asymptotic_profile(const SphereDensity& f, double lambda) {
  const int n = f.n;
  const double c = stationary_phase_constant(n, lambda), ph = pi * (n - 1) / 4;
  AsymptoticProfile a;
  a.lambda = lambda;
  a.f_plus = {n, [=](const Vec3& w) { return c * std::exp(-I * ph) * f(w); }, f.degree};
  a.f_minus = {n, [=](const Vec3& w) {
                 Vec3 m{-w[0], -w[1], -w[2]};
                 return c * std::exp(I * ph) * f(m);
               },
               f.degree};
  return a;
}

// Least-squares fit of r^{(n-1)/2} u(r w) = e^{i lambda r}(F_+ + G_+/r) + e^{-i lambda r}(F_- + G_-/r)
// over r in [R, 3R/2]; a cross-check of the analytic profile.
inline std::pair<cplx, cplx> fit_profile(const std::function<cplx(const Vec3&)>& u, int n, double lambda, double R,
                                         const Vec3& w, int samples = 64) {
  Eigen::MatrixXcd A(samples, 4);
  Eigen::VectorXcd b(samples);
  for (int k = 0; k < samples; ++k) {
    double r = R * (1 + 0.5 * k / (samples - 1));
    Vec3 x{r * w[0], r * w[1], r * w[2]};
    A(k, 0) = std::exp(I * (lambda * r));
    A(k, 1) = std::exp(-I * (lambda * r));
    A(k, 2) = A(k, 0) * (R / r);
    A(k, 3) = A(k, 1) * (R / r);
    b[k] = std::pow(r, (n - 1) / 2.0) * u(x);
  }
  Eigen::VectorXcd s = A.colPivHouseholderQr().solve(b);
  return {s[0], s[1]};
}

struct StationaryPhaseErrors {
  std::vector<double> radii, errors;
  LineFit fit;
};

// Envelope error max |u - leading| over [R, R + pi/lambda] along direction w.
inline StationaryPhaseErrors stationary_phase_errors(const SphereDensity& f, double lambda, const Vec3& w,
                                                     const std::vector<double>& radii, int samples = 16) {
  StationaryPhaseErrors out;
  const int n = f.n;
  Eigenfunction u(f, lambda);
  for (double R : radii) {
    double e = 0;
    for (int k = 0; k < samples; ++k) {
      double r = R + pi / lambda * k / samples;
      Vec3 x{0, 0, 0};
      for (int i = 0; i < n; ++i) x[i] = r * w[i];
      e = std::max(e, std::abs(u(x) - stationary_phase_leading(f, lambda, x)));
    }
    out.radii.push_back(R);
    out.errors.push_back(e);
  }
  out.fit = fit_loglog(out.radii, out.errors);
  return out;
}

// ---- threshold scan -------------------------------------------------------------

enum class ThresholdRegime { above, at, below };

struct ThresholdRow {
  double r = 0;
  ThresholdRegime regime = ThresholdRegime::above;
  std::vector<double> mass;      // per radius
  double exponent = NAN;         // fitted growth exponent (above)
  double log_fit_r2 = NAN;       // mass vs log R (at)
  double tail_ratio = NAN;       // mass(R_max)/mass(R_min) (below)
};

// Truncated weighted masses int_{|x|<R} <x>^{2r}|u|^2 of the eigenfunction of f. Growth
// exponents come from the increments M(R_{k+1}) - M(R_k) over the (geometric) radii.
inline std::vector<ThresholdRow> threshold_scan(const SphereDensity& f, double lambda, const std::vector<double>& orders,
                                                const std::vector<double>& radii, const MassOptions& opt = {}) {
  std::vector<double> R = radii;
  std::sort(R.begin(), R.end());
  if (R.size() < 3 || R.back() < 10 * R.front()) throw ConfigError("threshold_scan: radii must span at least one decade");
  Eigenfunction ef(f, lambda);
  auto u = [&](const Vec3& x) { return ef(x); };
  MassTable tab = truncated_weighted_mass(u, f.n, orders, R, opt);
  if (!tab.converged) throw NumericalError("threshold_scan: radial quadrature did not converge");
  std::vector<ThresholdRow> rows;
  for (size_t k = 0; k < orders.size(); ++k) {
    ThresholdRow row;
    row.r = orders[k];
    row.mass = tab.mass[k];
    std::vector<double> rr, inc, lr;
    for (size_t j = 0; j + 1 < R.size(); ++j) {
      rr.push_back(R[j]);
      inc.push_back(row.mass[j + 1] - row.mass[j]);
    }
    for (double x : R) lr.push_back(std::log(x));
    row.tail_ratio = row.mass.back() / row.mass.front();
    if (std::abs(row.r + 0.5) < 1e-12) {
      row.regime = ThresholdRegime::at;
      row.log_fit_r2 = fit_line(lr, row.mass).r2;
    } else if (row.r > -0.5) {
      row.regime = ThresholdRegime::above;
      row.exponent = fit_loglog(rr, inc).slope;
    } else {
      row.regime = ThresholdRegime::below;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---- formal series ---------------------------------------------------------------

// u_J = sum_{j<=J} r^{-p_j} e^{s i lambda r} a_j(w), p_j = (n-1)/2 + j, s = -1 incoming.
struct FormalSeries {
  int n = 2;
  double lambda = 1;
  int sign = -1;
  std::vector<HarmonicDensity> a;

  cplx operator()(const Vec3& x) const { return eval(x).first; }

  // value and radial derivative
  std::pair<cplx, cplx> eval(const Vec3& x) const {
    const double r = std::sqrt(norm2(x, n));
    Vec3 w{0, 0, 0};
    for (int i = 0; i < n; ++i) w[i] = x[i] / r;
    cplx e = std::exp(I * (sign * lambda * r)), u = 0, du = 0;
    for (size_t j = 0; j < a.size(); ++j) {
      double p = (n - 1) / 2.0 + j;
      cplx aj = a[j](w);
      cplx t = std::pow(r, -p) * e * aj;
      u += t;
      du += t * (I * (sign * lambda) - p / r);
    }
    return {u, du};
  }
};

// Leading coefficient of (Delta - lambda^2)(r^{-p} e^{s i lambda r} a) with Delta the positive
// Laplacian: s i lambda (2p - n + 1).
inline cplx formal_obstruction(double p, int n, double lambda, int sign = -1) {
  return double(sign) * I * lambda * (2 * p - n + 1);
}

// a_{j+1} = -(p_j(n-2-p_j) a_j + Delta_S a_j) / (2 s i lambda (j+1)), cancelling the
// r^{-p_j-2} error left by term j.
inline HarmonicDensity poisson_series_step(const HarmonicDensity& aj, int j, double lambda, int n, int sign = -1,
                                           std::optional<double> power = std::nullopt) {
  if (j < 0) throw std::invalid_argument("poisson_series_step: j must be >= 0");
  const double pj = (n - 1) / 2.0 + j;
  if (power && std::abs(*power - pj) > 1e-12) {
    cplx ob = formal_obstruction(*power - j, n, lambda, sign);
    throw PreconditionError("formal series: radial power " + std::to_string(*power) +
                            " leaves a leading error i lambda (2p - n + 1) = " + std::to_string(ob.imag()) +
                            " i that no next term can cancel; the series needs p = (n-1)/2");
  }
  HarmonicDensity next = aj.laplacian();
  const cplx denom = 2.0 * double(sign) * I * lambda * double(j + 1);
  for (size_t k = 0; k < next.coeffs.size(); ++k) next.coeffs[k] = -(pj * (n - 2 - pj) * aj.coeffs[k] + next.coeffs[k]) / denom;
  return next;
}

using ExpansionCoeffs = FormalSeries;

inline FormalSeries build_formal_series(const HarmonicDensity& a0, double lambda, int J, int sign = -1) {
  FormalSeries s{a0.n, lambda, sign, {a0}};
  for (int j = 0; j < J; ++j) s.a.push_back(poisson_series_step(s.a.back(), j, lambda, a0.n, sign));
  return s;
}

// (Delta - lambda^2) u at x by a 7-point sixth-order Cartesian stencil.
inline cplx helmholtz_residual_fd(const std::function<cplx(const Vec3&)>& u, int n, double lambda, const Vec3& x, double h = 0.02) {
  static const double c[4] = {-49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90};
  cplx lap = 0;
  const cplx u0 = u(x);
  for (int d = 0; d < n; ++d) {
    cplx s = c[0] * u0;
    for (int k = 1; k <= 3; ++k) {
      Vec3 a = x, b = x;
      a[d] += k * h;
      b[d] -= k * h;
      s += c[k] * (u(a) + u(b));
    }
    lap += s / (h * h);
  }
  return -lap - lambda * lambda * u0;
}

// ---- free scattering matrix --------------------------------------------------------

// f_+(w) = S f_-(w) = phase(n) f_-(-w); the phase follows from the stationary-phase
// coefficients: e^{-i pi (n-1)/2}.
inline cplx free_smatrix_phase(int n) { return std::exp(-I * (pi * (n - 1) / 2)); }

inline SphereDensity free_scattering_matrix(double /*lambda*/, const SphereDensity& f_minus) {
  const cplx c = free_smatrix_phase(f_minus.n);
  return {f_minus.n, [=](const Vec3& w) { return c * f_minus(Vec3{-w[0], -w[1], -w[2]}); }, f_minus.degree};
}

// The S-matrix constant read off one harmonic mode without any large-r fit. The computed
// eigenfunction of Y_lm is projected onto Y_lm at radius R (value and radial derivative)
// and split as alpha H^(1)_l + beta H^(2)_l; with the Hankel asymptotics
// H^(1,2)(z) ~ kappa_{1,2} e^{+-iz} z^{-(n-1)/2} and Y(-w) = (-1)^l Y(w) the constant is
// alpha kappa_1 / (beta kappa_2 (-1)^l). `nodes` sets both quadratures.
struct ModePhase {
  cplx phase = 0;
  cplx alpha = 0, beta = 0;
};

inline ModePhase smatrix_phase_from_mode(int n, int l, int m, double lambda, double R, int nodes) {
  if (n != 2 && n != 3) throw std::invalid_argument("smatrix_phase_from_mode: n must be 2 or 3");
  const int order = n == 2 ? std::abs(m) : l;
  SphereDensity f{n, [=](const Vec3& w) { return HarmonicDensity::basis(n, l, m, w); }, nodes};
  EigenfunctionOptions opt;
  opt.min_nodes = nodes;
  opt.max_nodes = std::max(opt.max_nodes, nodes);
  Eigenfunction E(f, lambda, opt);
  auto q = SphereQuadrature::make(n, nodes);
  cplx c = 0, d = 0;
  for (size_t k = 0; k < q.size(); ++k) {
    Vec3 x{R * q.nodes[k][0], R * q.nodes[k][1], R * q.nodes[k][2]};
    auto [u, du] = E.with_dr(x);
    const cplx y = std::conj(f(q.nodes[k])) * q.weights[k];
    c += y * u;
    d += y * du;
  }
  // Bessel pair and derivatives via f_l' = (l/z) f_l - f_{l+1}
  const double z = lambda * R;
  auto J = [&](int k) { return n == 2 ? std::cyl_bessel_j(double(k), z) : std::sph_bessel(k, z); };
  auto Y = [&](int k) { return n == 2 ? std::cyl_neumann(double(k), z) : std::sph_neumann(k, z); };
  const cplx h1 = cplx(J(order), Y(order)), h1n = cplx(J(order + 1), Y(order + 1));
  const cplx h2 = std::conj(h1), h2n = std::conj(h1n);
  const cplx dh1 = lambda * (order / z * h1 - h1n), dh2 = lambda * (order / z * h2 - h2n);
  const cplx det = h1 * dh2 - h2 * dh1;
  ModePhase out;
  out.alpha = (c * dh2 - h2 * d) / det;
  out.beta = (h1 * d - dh1 * c) / det;
  const cplx kappa1 = n == 2 ? std::sqrt(2 / pi) * std::exp(-I * (order * pi / 2 + pi / 4)) : std::pow(-I, order + 1);
  const double parity = order % 2 ? -1.0 : 1.0;
  out.phase = out.alpha * kappa1 / (out.beta * std::conj(kappa1) * parity);
  return out;
}

// ---- boundary pairing ----------------------------------------------------------------

// u = E(f) + (1 - chi(r)) W with E the eigenfunction of f and W an outgoing truncated
// formal series with leading coefficient g (chi = 1 near 0, so u is smooth).
struct PairingSolution {
  SphereDensity f;
  std::optional<FormalSeries> outgoing;
  double cutoff = 2;  // 1 - chi vanishes on r <= cutoff/2 and is 1 on r >= cutoff

  // E evaluates the eigenfunction of f
  std::pair<cplx, cplx> value_dr(const Eigenfunction& E, const Vec3& x) const {
    auto [u, du] = E.with_dr(x);
    if (outgoing) {
      const double r = std::sqrt(norm2(x, f.n));
      if (r >= cutoff) {
        auto [w, dw] = outgoing->eval(x);
        u += w;
        du += dw;
      } else if (r > cutoff / 2) {
        double c = smooth_step(2 * r / cutoff - 1), dc = smooth_step_deriv(2 * r / cutoff - 1) * 2 / cutoff;
        auto [w, dw] = outgoing->eval(x);
        u += c * w;
        du += c * dw + dc * w;
      }
    }
    return {u, du};
  }

  AsymptoticProfile profile(double lambda) const {
    AsymptoticProfile a = asymptotic_profile(f, lambda);
    if (outgoing) {
      auto fp = a.f_plus;
      HarmonicDensity g = outgoing->a.front();
      a.f_plus = {f.n, [fp, g](const Vec3& w) { return fp(w) + g(w); }, std::max(fp.degree, 4 * g.L + 8)};
    }
    return a;
  }
};

struct PairingResult {
  cplx lhs = 0, rhs = 0;
  double gap = 0, relative_gap = 0;
};

// lhs(R) = int_{B_R} (u1 conj(P u2) - P u1 conj(u2)) written by Green's formula as the
// sphere term -R^{n-1} int (u1 d_r conj u2 - d_r u1 conj u2); rhs = 2 i lambda int (f1+ conj f2+ - f1- conj f2-).
inline PairingResult boundary_pairing_check(const PairingSolution& u1, const PairingSolution& u2, double lambda, double R,
                                            int sphere_nodes = 0) {
  const int n = u1.f.n;
  if (u2.f.n != n) throw std::invalid_argument("boundary pairing: dimension mismatch");
  // the integrand carries angular frequencies up to about 2 lambda R
  if (sphere_nodes <= 0) sphere_nodes = 2 * eigenfunction_nodes(lambda, R);
  auto q = SphereQuadrature::make(n, sphere_nodes);
  Eigenfunction e1(u1.f, lambda), e2(u2.f, lambda);
  cplx s = 0;
  for (size_t k = 0; k < q.size(); ++k) {
    Vec3 x{R * q.nodes[k][0], R * q.nodes[k][1], R * q.nodes[k][2]};
    auto [a, da] = u1.value_dr(e1, x);
    auto [b, db] = u2.value_dr(e2, x);
    s += q.weights[k] * (a * std::conj(db) - da * std::conj(b));
  }
  PairingResult out;
  out.lhs = -std::pow(R, n - 1) * s;
  auto p1 = u1.profile(lambda), p2 = u2.profile(lambda);
  auto qq = SphereQuadrature::make(n, std::max({p1.f_plus.degree, p2.f_plus.degree, 128}));
  cplx t = qq.integrate([&](const Vec3& w) {
    return p1.f_plus(w) * std::conj(p2.f_plus(w)) - p1.f_minus(w) * std::conj(p2.f_minus(w));
  });
  out.rhs = 2.0 * I * lambda * t;
  out.gap = std::abs(out.lhs - out.rhs);
  out.relative_gap = std::abs(out.rhs) > 0 ? out.gap / std::abs(out.rhs) : out.gap;
  return out;
}

}  // namespace scatcalc

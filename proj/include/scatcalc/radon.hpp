#pragma once

#include <Eigen/Dense>

#include <map>
#include <numeric>
#include <optional>

#include "sphere.hpp"

namespace scatcalc {

// phi even, nonnegative, 1 on |t| <= 1, 0 on |t| >= 2; phi_tilde = phi * phi.
struct LocalizerProfile {
  std::function<double(double)> phi;
  std::vector<double> t, wphi;  // composite Gauss-Legendre on [-2, 2], weights times phi
  double mass = 0;              // int phi
  std::vector<double> t_fine, wphi_fine;  // 128 panels, for phi_hat up to |s| ~ 200

  static LocalizerProfile standard(int panels = 16, int per_panel = 8) {
    return from([](double t) { return plateau(t, 1, 2); }, panels, per_panel);
  }

  static LocalizerProfile from(std::function<double(double)> phi, int panels = 16, int per_panel = 8) {
    LocalizerProfile p;
    p.phi = std::move(phi);
    auto gl = gauss_legendre(per_panel);
    const double h = 4.0 / panels;
    for (int k = 0; k < panels; ++k)
      for (int i = 0; i < per_panel; ++i) {
        double t = -2 + h * (k + 0.5 + 0.5 * gl.nodes[i]);
        double w = 0.5 * h * gl.weights[i] * p.phi(t);
        if (w == 0) continue;
        p.t.push_back(t);
        p.wphi.push_back(w);
        p.mass += w;
      }
    auto g8 = gauss_legendre(8);
    for (int k = 0; k < 128; ++k)
      for (int i = 0; i < 8; ++i) {
        double t = -2 + 4.0 / 128 * (k + 0.5 + 0.5 * g8.nodes[i]);
        double w = 0.5 * 4.0 / 128 * g8.weights[i] * p.phi(t);
        if (w == 0) continue;
        p.t_fine.push_back(t);
        p.wphi_fine.push_back(w);
      }
    return p;
  }

  double operator()(double t) const { return phi(t); }

  // (phi * phi)(r), supported in |r| <= 4
  double tilde(double r) const {
    r = std::abs(r);
    if (r >= 4) return 0;
    double s = 0;
    for (size_t i = 0; i < t.size(); ++i) s += wphi[i] * phi(r - t[i]);
    return s;
  }

  // Fourier transform int phi(t) e^{-i t s} dt (real, even)
  double hat(double s) const {
    double v = 0;
    for (size_t i = 0; i < t_fine.size(); ++i) v += wphi_fine[i] * std::cos(t_fine[i] * s);
    return v;
  }
};

struct ConeCutoff {
  std::function<double(double)> chi;
  double operator()(double w1) const { return chi(w1); }

  static ConeCutoff none() { return {[](double) { return 1.0; }}; }
  // 1 on |w1| <= width/2, 0 on |w1| >= width
  static ConeCutoff bump(double width) {
    return {[width](double w1) { return plateau(w1, width / 2, width); }};
  }
  void validate() const {
    if (!(chi(0) >= 0.5)) throw ConfigError("cone cutoff: chi(0) must be >= 0.5");
    for (int k = -20; k <= 20; ++k)
      if (chi(k / 20.0) < 0) throw ConfigError("cone cutoff: chi must be nonnegative");
  }
};

struct DirectionSet {
  int n = 2;
  std::vector<Vec3> nodes;
  std::vector<double> weights;

  // n = 2: m equispaced angles; n = 3: Gauss-Legendre in w_3 times m azimuths
  static DirectionSet make(int n, int m) {
    auto q = SphereQuadrature::make(n, m);
    return {n, q.nodes, q.weights};
  }
  static DirectionSet standard(int n) { return make(n, n == 2 ? 64 : 34); }
  size_t size() const { return nodes.size(); }
};

// I_0 f(z, w) = int f(z + t w) phi(t) dt
inline double xray_transform(const std::function<double(const Vec3&)>& f, const Vec3& z, const Vec3& w,
                             const LocalizerProfile& phi, int n) {
  double s = 0;
  for (size_t i = 0; i < phi.t.size(); ++i) {
    Vec3 p{0, 0, 0};
    for (int d = 0; d < n; ++d) p[d] = z[d] + phi.t[i] * w[d];
    s += phi.wphi[i] * f(p);
  }
  return s;
}

// Lv(y) = int int v(y - t w, w) phi(t) dt dw over a direction set.
inline std::function<double(const Vec3&)> backproject(std::function<double(const Vec3&, size_t)> v, DirectionSet dirs,
                                                      LocalizerProfile phi) {
  return [v = std::move(v), dirs = std::move(dirs), phi = std::move(phi)](const Vec3& y) {
    const int n = dirs.n;
    double s = 0;
    for (size_t k = 0; k < dirs.size(); ++k) {
      double a = 0;
      for (size_t i = 0; i < phi.t.size(); ++i) {
        Vec3 p{0, 0, 0};
        for (int d = 0; d < n; ++d) p[d] = y[d] - phi.t[i] * dirs.nodes[k][d];
        a += phi.wphi[i] * v(p, k);
      }
      s += dirs.weights[k] * a;
    }
    return s;
  };
}

// Samples of v on (uniform grid on [-half, half]^n) x directions, multilinearly interpolated.
struct LineSamples {
  int n = 2;
  int N = 0;
  double half = 1;
  std::vector<std::vector<double>> values;  // [direction][grid index]

  double h() const { return 2 * half / (N - 1); }
  size_t index(const std::array<int, 3>& i) const {
    size_t s = 0;
    for (int d = n - 1; d >= 0; --d) s = s * N + i[d];
    return s;
  }
  double operator()(const Vec3& z, size_t k) const {
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0, 0, 0};
    for (int d = 0; d < n; ++d) {
      double u = (z[d] + half) / h();
      if (u < -1e-12 || u > N - 1 + 1e-12) throw std::out_of_range("line samples: interpolation point outside the grid");
      int b = std::clamp(static_cast<int>(std::floor(u)), 0, N - 2);
      base[d] = b;
      frac[d] = u - b;
    }
    double s = 0;
    for (int c = 0; c < (1 << n); ++c) {
      double w = 1;
      std::array<int, 3> i = base;
      for (int d = 0; d < n; ++d) {
        int bit = (c >> d) & 1;
        i[d] += bit;
        w *= bit ? frac[d] : 1 - frac[d];
      }
      if (w != 0) s += w * values[k][index(i)];
    }
    return s;
  }
};

inline std::function<double(const Vec3&)> backproject(const LineSamples& v, const DirectionSet& dirs, const LocalizerProfile& phi) {
  if (v.values.size() != dirs.size()) throw std::invalid_argument("backproject: sample/direction count mismatch");
  return backproject([v](const Vec3& z, size_t k) { return v(z, k); }, dirs, phi);
}

// ---- symbols --------------------------------------------------------------------

struct SymbolTable {
  int n = 2;
  std::vector<double> xi, value;
  double dc_value = 0;       // value as |xi| -> 0: |S^{n-1}| (int phi)^2
  double plateau_c = 0;      // mean of value * |xi| over the top decade
  double plateau_variation = 0;
  bool positive = true;
};

// Fourier transform of K(w) = 2 phi_tilde(|w|) |w|^{-(n-1)} in polar form:
// 4 pi int phi_tilde(r) J0(r k) dr (n = 2), 8 pi int phi_tilde(r) sinc(r k) dr (n = 3).
inline double normal_kernel_value(int n, double k, const std::vector<double>& r,
                                  const std::vector<double>& wr) {
  double s = 0;
  for (size_t i = 0; i < r.size(); ++i) {
    double x = r[i] * k;
    double g = n == 2 ? std::cyl_bessel_j(0.0, x) : (x < 1e-8 ? 1.0 : std::sin(x) / x);
    s += wr[i] * g;
  }
  return (n == 2 ? 4 * pi : 8 * pi) * s;
}

inline SymbolTable normal_kernel_symbol(int n, const LocalizerProfile& phi, const std::vector<double>& xi_grid) {
  if (n != 2 && n != 3) throw std::invalid_argument("normal_kernel_symbol: n must be 2 or 3");
  if (xi_grid.empty() || *std::min_element(xi_grid.begin(), xi_grid.end()) > 0.1 + 1e-12 ||
      *std::max_element(xi_grid.begin(), xi_grid.end()) < 100 - 1e-9)
    throw ConfigError("normal_kernel_symbol: xi grid must span [0.1, 100]");
  // phi_tilde tabulated on a composite rule over [0, 4]; panels resolve oscillations up to |xi| ~ 1e3
  const int panels = 800;
  auto gl = gauss_legendre(8);
  std::vector<double> r, wr;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < 8; ++i) {
      double x = 4.0 * (p + 0.5 + 0.5 * gl.nodes[i]) / panels;
      r.push_back(x);
      wr.push_back(0.5 * 4.0 / panels * gl.weights[i] * phi.tilde(x));
    }
  SymbolTable tab;
  tab.n = n;
  for (double k : xi_grid) {
    tab.xi.push_back(k);
    double v = normal_kernel_value(n, k, r, wr);
    tab.value.push_back(v);
    if (!(v > 0)) tab.positive = false;
  }
  tab.dc_value = normal_kernel_value(n, 0.0, r, wr);
  const double kmax = *std::max_element(xi_grid.begin(), xi_grid.end());
  std::vector<double> top;
  for (size_t i = 0; i < tab.xi.size(); ++i)
    if (tab.xi[i] >= kmax / 10) top.push_back(tab.value[i] * tab.xi[i]);
  double lo = *std::min_element(top.begin(), top.end()), hi = *std::max_element(top.begin(), top.end());
  tab.plateau_c = std::accumulate(top.begin(), top.end(), 0.0) / top.size();
  tab.plateau_variation = (hi - lo) / tab.plateau_c;
  return tab;
}

// Symbol of L chi I_0 at xi: int_S chi(w_1) |phi_hat(w . xi)|^2 dw by direct quadrature.
inline double cone_symbol(int n, const LocalizerProfile& phi, const ConeCutoff& chi, const Vec3& xi) {
  const double k = std::sqrt(norm2(xi, n));
  if (n == 2) {
    const int m = std::max(512, static_cast<int>(24 * k));
    double s = 0;
    for (int j = 0; j < m; ++j) {
      double th = 2 * pi * j / m;
      double c = std::cos(th), sn = std::sin(th);
      double h = phi.hat(c * xi[0] + sn * xi[1]);
      s += chi(c) * h * h;
    }
    return s * 2 * pi / m;
  }
  if (n != 3) throw std::invalid_argument("cone_symbol: n must be 2 or 3");
  // w = c e + sqrt(1 - c^2)(cos psi a + sin psi b) with e = xi/|xi|; dw = dc dpsi
  Vec3 e{1, 0, 0};
  if (k > 0) e = {xi[0] / k, xi[1] / k, xi[2] / k};
  Vec3 a = std::abs(e[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  double ae = dot(a, e, 3);
  for (int d = 0; d < 3; ++d) a[d] -= ae * e[d];
  double na = std::sqrt(norm2(a, 3));
  for (int d = 0; d < 3; ++d) a[d] /= na;
  Vec3 b{e[1] * a[2] - e[2] * a[1], e[2] * a[0] - e[0] * a[2], e[0] * a[1] - e[1] * a[0]};
  // s = k c; |phi_hat(s)|^2 is negligible past |s| = 60
  const double smax = std::min(k, 60.0);
  const int panels = std::max(8, static_cast<int>(4 * smax));
  const int npsi = 256;
  auto gl = gauss_legendre(8);
  double total = 0;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < 8; ++i) {
      double s = -smax + 2 * smax * (p + 0.5 + 0.5 * gl.nodes[i]) / panels;
      double w = smax / panels * gl.weights[i];
      double c = k > 0 ? s / k : 0, rc = std::sqrt(std::max(0.0, 1 - c * c));
      double g = 0;
      for (int j = 0; j < npsi; ++j) {
        double ps = 2 * pi * j / npsi;
        double w1 = c * e[0] + rc * (std::cos(ps) * a[0] + std::sin(ps) * b[0]);
        g += chi(w1);
      }
      g *= 2 * pi / npsi;
      double h = phi.hat(s);
      total += w * h * h * g;
    }
  return k > 0 ? total / k : total;
}

struct ConeReport {
  int n = 3;
  std::vector<double> xi_ladder, direction_w1;  // |xi| values; xi_hat_1 values scanned
  std::vector<std::vector<double>> scaled;      // symbol * |xi| [ladder][direction]
  double floor = 0;                              // min of symbol * |xi| at the top of the ladder
  double full_floor = 0;                         // same with chi = 1
  double relative_floor = 0;
  Vec3 worst_direction{0, 0, 0};
  bool elliptic = true;
};

// The symbol depends on xi_hat only through |xi_hat_1| (chi sees w_1 alone), so directions are
// scanned along xi_hat = (cos a, sin a, 0), a in [0, pi/2].
inline ConeReport cone_ellipticity_check(int n, const ConeCutoff& chi, const LocalizerProfile& phi,
                                         const std::vector<double>& ladder = {1, 3, 10, 30, 100}, int directions = 17) {
  chi.validate();
  ConeReport rep;
  rep.n = n;
  rep.xi_ladder = ladder;
  const auto full = ConeCutoff::none();
  double worst = INFINITY, full_worst = INFINITY;
  for (double k : ladder) {
    std::vector<double> row;
    bool top = k == ladder.back();
    for (int j = 0; j < directions; ++j) {
      double a = pi / 2 * j / (directions - 1);
      Vec3 xi{k * std::cos(a), k * std::sin(a), 0};
      double v = cone_symbol(n, phi, chi, xi) * k;
      row.push_back(v);
      if (top) {
        if (v < worst) {
          worst = v;
          rep.worst_direction = {std::cos(a), std::sin(a), 0};
        }
        full_worst = std::min(full_worst, cone_symbol(n, phi, full, xi) * k);
      }
    }
    rep.scaled.push_back(row);
  }
  for (int j = 0; j < directions; ++j) rep.direction_w1.push_back(std::cos(pi / 2 * j / (directions - 1)));
  rep.floor = worst;
  rep.full_floor = full_worst;
  rep.relative_floor = worst / full_worst;
  rep.elliptic = rep.relative_floor > 1e-3;
  return rep;
}

// ---- discrete injectivity ------------------------------------------------------------

struct InjectivityOptions {
  int n = 2;
  int N = 24;             // unknowns per axis
  double half = 1.5;      // unknown grid on [-half, half]^n
  int directions = 0;     // 0: standard set
  int line_panels = 16;   // phi quadrature panels (8 nodes each)
  std::optional<ConeCutoff> chi;
};

struct InjectivityReport {
  int n = 2, N = 0;
  size_t unknowns = 0, directions = 0;
  double sigma_min = 0, sigma_max = 0;
  double sigma_min_refined = 0, sigma_stability = 0;  // |refined/base - 1|
  bool singular = false;
  double reconstruction_error = NAN;
  double zero_reconstruction_norm = NAN;
};

namespace detail {

// Normal matrix of the discretized I_0 with lines based at every lattice point: block Toeplitz,
// entry (j, l) = sum_w weight_w sum_d c_w(d) c_w(d + j - l), c_w the interpolated line stencil.
inline Eigen::MatrixXd radon_normal_matrix(const InjectivityOptions& o, const DirectionSet& dirs, const LocalizerProfile& phi) {
  const int n = o.n, N = o.N;
  const double h = 2 * o.half / (N - 1);
  const int span = 2 * N - 1;
  size_t cells = 1;
  for (int d = 0; d < n; ++d) cells *= span;
  std::vector<double> acf(cells, 0.0);
  auto cell = [&](const std::array<int, 3>& D) {
    size_t s = 0;
    for (int d = n - 1; d >= 0; --d) s = s * span + (D[d] + N - 1);
    return s;
  };
  for (size_t k = 0; k < dirs.size(); ++k) {
    double wk = dirs.weights[k] * (o.chi ? (*o.chi)(dirs.nodes[k][0]) : 1.0);
    if (wk == 0) continue;
    // stencil: value at lattice offset m = sum_q wphi_q Hat(m + t_q w / h) seen from the line base
    std::map<std::array<int, 3>, double> st;
    for (size_t q = 0; q < phi.t.size(); ++q) {
      std::array<int, 3> base{0, 0, 0};
      std::array<double, 3> frac{0, 0, 0};
      for (int d = 0; d < n; ++d) {
        double u = phi.t[q] * dirs.nodes[k][d] / h;
        base[d] = static_cast<int>(std::floor(u));
        frac[d] = u - base[d];
      }
      for (int c = 0; c < (1 << n); ++c) {
        double w = phi.wphi[q];
        std::array<int, 3> m = base;
        for (int d = 0; d < n; ++d) {
          int bit = (c >> d) & 1;
          m[d] += bit;
          w *= bit ? frac[d] : 1 - frac[d];
        }
        if (w != 0) st[m] += w;
      }
    }
    std::vector<std::pair<std::array<int, 3>, double>> sv(st.begin(), st.end());
    for (auto& [m1, v1] : sv)
      for (auto& [m2, v2] : sv) {
        std::array<int, 3> D{0, 0, 0};
        bool inside = true;
        for (int d = 0; d < n; ++d) {
          D[d] = m2[d] - m1[d];
          if (std::abs(D[d]) > N - 1) inside = false;
        }
        if (inside) acf[cell(D)] += wk * v1 * v2;
      }
  }
  size_t M = 1;
  for (int d = 0; d < n; ++d) M *= N;
  auto coords = [&](size_t j) {
    std::array<int, 3> c{0, 0, 0};
    for (int d = 0; d < n; ++d) {
      c[d] = static_cast<int>(j % N);
      j /= N;
    }
    return c;
  };
  Eigen::MatrixXd A(M, M);
  for (size_t j = 0; j < M; ++j) {
    auto cj = coords(j);
    for (size_t l = 0; l < M; ++l) {
      auto cl = coords(l);
      std::array<int, 3> D{0, 0, 0};
      for (int d = 0; d < n; ++d) D[d] = cj[d] - cl[d];
      A(j, l) = acf[cell(D)];
    }
  }
  return A;
}

}  // namespace detail

// Smallest singular value of the discrete normal operator, its stability when the line and
// direction quadratures are refined, and a reconstruction of a smooth f0 from A f0.
inline InjectivityReport injectivity_probe(const InjectivityOptions& o) {
  if (o.n != 2 && o.n != 3) throw std::invalid_argument("injectivity_probe: n must be 2 or 3");
  size_t M = 1;
  for (int d = 0; d < o.n; ++d) M *= o.N;
  if (M > 2000) throw ConfigError("injectivity_probe: grid too large for a dense solve");
  if (o.chi) o.chi->validate();
  InjectivityReport rep;
  rep.n = o.n;
  rep.N = o.N;
  rep.unknowns = M;
  const int m0 = o.directions > 0 ? o.directions : (o.n == 2 ? 64 : 34);
  auto dirs = DirectionSet::make(o.n, m0);
  rep.directions = dirs.size();
  auto phi = LocalizerProfile::standard(o.line_panels);
  Eigen::MatrixXd A = detail::radon_normal_matrix(o, dirs, phi);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  rep.sigma_min = std::max(0.0, es.eigenvalues().minCoeff());
  rep.sigma_max = es.eigenvalues().maxCoeff();
  rep.singular = !(rep.sigma_min > 1e-12 * rep.sigma_max);

  auto dirs2 = DirectionSet::make(o.n, 2 * m0);
  auto phi2 = LocalizerProfile::standard(2 * o.line_panels);
  Eigen::MatrixXd A2 = detail::radon_normal_matrix(o, dirs2, phi2);
  rep.sigma_min_refined = std::max(0.0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A2, Eigen::EigenvaluesOnly).eigenvalues().minCoeff());
  rep.sigma_stability = rep.sigma_min > 0 ? std::abs(rep.sigma_min_refined / rep.sigma_min - 1) : INFINITY;

  if (!rep.singular) {
    const double h = 2 * o.half / (o.N - 1);
    Eigen::VectorXd f0(M);
    for (size_t j = 0; j < M; ++j) {
      size_t q = j;
      double r2 = 0, tilt = 0;
      for (int d = 0; d < o.n; ++d) {
        double x = -o.half + h * (q % o.N);
        q /= o.N;
        r2 += x * x;
        tilt += (d + 1) * x;
      }
      f0[j] = std::exp(-3 * r2) * (1 + 0.3 * tilt);
    }
    auto solve = [&](const Eigen::VectorXd& b) {
      Eigen::VectorXd c = es.eigenvectors().transpose() * b;
      c.array() /= es.eigenvalues().array();
      return Eigen::VectorXd(es.eigenvectors() * c);
    };
    Eigen::VectorXd f = solve(A * f0);
    rep.reconstruction_error = (f - f0).norm() / f0.norm();
    rep.zero_reconstruction_norm = solve(A * Eigen::VectorXd::Zero(M)).norm();
  }
  return rep;
}

}  // namespace scatcalc

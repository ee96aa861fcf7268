#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <sstream>

#include "symbol.hpp"

namespace scatcalc {

enum class Model { generic, helmholtz, klein_gordon, schrodinger, wave, xDx, d_x1 };

inline const char* model_name(Model m) {
  switch (m) {
    case Model::helmholtz: return "helmholtz";
    case Model::klein_gordon: return "klein_gordon";
    case Model::schrodinger: return "schrodinger";
    case Model::wave: return "wave";
    case Model::xDx: return "xDx";
    case Model::d_x1: return "D_x1";
    default: return "generic";
  }
}

// Real principal symbol plus optional closed-form data. For spacetime models
// (klein_gordon, schrodinger, wave) coordinate 0 is t and xi_0 is tau.
struct SymbolHamiltonian {
  Symbol p;
  Model model = Model::generic;
  double lambda = 1;
  double mass = 1;
  // Boundary charts use H_{scale * p}; Helmholtz uses 1/2 so the fields match the
  // usual rho^{-1} H_p normalisation with rate xi_1.
  double boundary_scale = 1;
  // (d_x p, d_xi p); finite differences of p when empty.
  std::function<std::pair<Vec3, Vec3>(const Vec3&, const Vec3&)> gradient;

  int n() const { return p.n; }
};

namespace models {

inline SymbolHamiltonian helmholtz(int n, double lambda) {
  if (n < 1 || n > 3) throw ConfigError("helmholtz: n must be 1..3");
  if (!(lambda > 0)) throw ConfigError("helmholtz: lambda must be positive");
  SymbolHamiltonian H;
  H.model = Model::helmholtz;
  H.lambda = lambda;
  H.boundary_scale = 0.5;
  H.p = make_symbol(n, [n, lambda](const Vec3&, const Vec3& k) { return cplx(norm2(k, n) - lambda * lambda); },
                    2, 0);
  H.gradient = [n](const Vec3&, const Vec3& k) {
    Vec3 gx{0, 0, 0}, gk{0, 0, 0};
    for (int i = 0; i < n; ++i) gk[i] = 2 * k[i];
    return std::make_pair(gx, gk);
  };
  return H;
}

// tau^2 - |xi|^2 - mass^2 on R^{1+d}, n = 1 + d
inline SymbolHamiltonian klein_gordon(int n, double mass = 1) {
  if (n < 2 || n > 3) throw ConfigError("klein_gordon: spacetime dimension must be 2 or 3");
  SymbolHamiltonian H;
  H.model = Model::klein_gordon;
  H.mass = mass;
  H.p = make_symbol(n, [n, mass](const Vec3&, const Vec3& k) {
    double v = k[0] * k[0] - mass * mass;
    for (int i = 1; i < n; ++i) v -= k[i] * k[i];
    return cplx(v);
  }, 2, 0);
  H.gradient = [n](const Vec3&, const Vec3& k) {
    Vec3 gx{0, 0, 0}, gk{2 * k[0], 0, 0};
    for (int i = 1; i < n; ++i) gk[i] = -2 * k[i];
    return std::make_pair(gx, gk);
  };
  return H;
}

inline SymbolHamiltonian wave(int n) {
  SymbolHamiltonian H = klein_gordon(n, 0.0);
  H.model = Model::wave;
  return H;
}

// tau + |xi|^2 on R^{1+d}
inline SymbolHamiltonian schrodinger(int n) {
  if (n < 2 || n > 3) throw ConfigError("schrodinger: spacetime dimension must be 2 or 3");
  SymbolHamiltonian H;
  H.model = Model::schrodinger;
  H.p = make_symbol(n, [n](const Vec3&, const Vec3& k) {
    double v = k[0];
    for (int i = 1; i < n; ++i) v += k[i] * k[i];
    return cplx(v);
  }, 2, 0);
  H.gradient = [n](const Vec3&, const Vec3& k) {
    Vec3 gx{0, 0, 0}, gk{1, 0, 0};
    for (int i = 1; i < n; ++i) gk[i] = 2 * k[i];
    return std::make_pair(gx, gk);
  };
  return H;
}

// x xi on R (order (1, 1))
inline SymbolHamiltonian xDx() {
  SymbolHamiltonian H;
  H.model = Model::xDx;
  H.p = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(x[0] * k[0]); }, 1, 1);
  H.gradient = [](const Vec3& x, const Vec3& k) { return std::make_pair(Vec3{k[0], 0, 0}, Vec3{x[0], 0, 0}); };
  return H;
}

inline SymbolHamiltonian d_x1(int n) {
  SymbolHamiltonian H;
  H.model = Model::d_x1;
  H.p = make_symbol(n, [](const Vec3&, const Vec3& k) { return cplx(k[0]); }, 1, 0);
  H.gradient = [](const Vec3&, const Vec3&) { return std::make_pair(Vec3{0, 0, 0}, Vec3{1, 0, 0}); };
  return H;
}

inline SymbolHamiltonian generic(const Symbol& p) {
  SymbolHamiltonian H;
  H.p = p;
  return H;
}

}  // namespace models

// (x', xi') = (d_xi p, -d_x p)
inline std::pair<Vec3, Vec3> hamilton_field(const SymbolHamiltonian& H, const Vec3& x, const Vec3& xi) {
  const int n = H.n();
  Vec3 gx{0, 0, 0}, gk{0, 0, 0};
  if (H.gradient) {
    std::tie(gx, gk) = H.gradient(x, xi);
  } else {
    for (int i = 0; i < n; ++i) {
      MultiIndex e{0, 0, 0}, z{0, 0, 0};
      e[i] = 1;
      gx[i] = partial(H.p, x, xi, e, z).real();
      gk[i] = partial(H.p, x, xi, z, e).real();
    }
  }
  Vec3 xd{0, 0, 0}, kd{0, 0, 0};
  for (int i = 0; i < n; ++i) {
    xd[i] = gk[i];
    kd[i] = -gx[i];
  }
  return {xd, kd};
}

// ---- charts -------------------------------------------------------------

enum class ChartKind { interior, spatial, fibre, kg, parabolic };

inline const char* chart_name(ChartKind k) {
  switch (k) {
    case ChartKind::interior: return "interior";
    case ChartKind::spatial: return "spatial";
    case ChartKind::fibre: return "fibre";
    case ChartKind::kg: return "kg";
    default: return "parabolic";
  }
}

// Coordinates, 2n entries:
//   interior  [x, xi]
//   spatial   [rho = sign/x_j, y_i = x_i/x_j (i != j), xi]
//   fibre     [rho_f = sign/xi_j, eta_i = xi_i/xi_j (i != j), x]
//   kg        [rho = sign/t, v = x tau/t + xi, tau, xi]          (spacetime, t = x_0)
//   parabolic [rho_b = sign/x_j, s = t/x_j, v_i = x_i/x_j, rho_f = fsign/xi_j,
//              sigma = tau/xi_j^2, omega_i = xi_i/xi_j]          (i spatial, i != j)
struct PhasePointChart {
  ChartKind kind = ChartKind::interior;
  int n = 1;
  int axis = 0;
  int sign = 1;
  int fsign = 1;
  std::array<double, 6> c{};

  size_t size() const { return 2 * static_cast<size_t>(n); }
  bool boundary() const { return kind != ChartKind::interior && c[0] == 0.0; }
  std::string id() const {
    std::ostringstream s;
    s << chart_name(kind);
    if (kind != ChartKind::interior) s << (sign > 0 ? "+" : "-") << axis;
    if (kind == ChartKind::parabolic) s << (fsign > 0 ? "+" : "-");
    return s.str();
  }
};

namespace detail {

inline std::vector<int> others(int n, int j, int from = 0) {
  std::vector<int> o;
  for (int i = from; i < n; ++i)
    if (i != j) o.push_back(i);
  return o;
}

inline int sgn(double v) { return v < 0 ? -1 : 1; }

}  // namespace detail

inline PhasePointChart to_chart(ChartKind kind, int n, int axis, const Vec3& x, const Vec3& xi) {
  PhasePointChart p;
  p.kind = kind;
  p.n = n;
  p.axis = axis;
  auto& c = p.c;
  switch (kind) {
    case ChartKind::interior:
      for (int i = 0; i < n; ++i) {
        c[i] = x[i];
        c[n + i] = xi[i];
      }
      break;
    case ChartKind::spatial: {
      if (x[axis] == 0) throw std::invalid_argument("to_chart: dominant variable vanishes");
      p.sign = detail::sgn(x[axis]);
      c[0] = p.sign / x[axis];
      int k = 1;
      for (int i : detail::others(n, axis)) c[k++] = x[i] / x[axis];
      for (int i = 0; i < n; ++i) c[n + i] = xi[i];
      break;
    }
    case ChartKind::fibre: {
      if (xi[axis] == 0) throw std::invalid_argument("to_chart: dominant frequency vanishes");
      p.sign = detail::sgn(xi[axis]);
      c[0] = p.sign / xi[axis];
      int k = 1;
      for (int i : detail::others(n, axis)) c[k++] = xi[i] / xi[axis];
      for (int i = 0; i < n; ++i) c[n + i] = x[i];
      break;
    }
    case ChartKind::kg: {
      if (x[0] == 0 || xi[0] == 0) throw std::invalid_argument("to_chart: kg chart needs t != 0 and tau != 0");
      p.sign = detail::sgn(x[0]);
      p.axis = 0;
      c[0] = p.sign / x[0];
      for (int i = 1; i < n; ++i) {
        c[i] = x[i] * xi[0] / x[0] + xi[i];
        c[n + i] = xi[i];
      }
      c[n] = xi[0];
      break;
    }
    case ChartKind::parabolic: {
      if (axis < 1) throw std::invalid_argument("to_chart: parabolic chart needs a spatial axis");
      if (x[axis] == 0 || xi[axis] == 0) throw std::invalid_argument("to_chart: parabolic chart needs x_j, xi_j != 0");
      p.sign = detail::sgn(x[axis]);
      p.fsign = detail::sgn(xi[axis]);
      c[0] = p.sign / x[axis];
      c[1] = x[0] / x[axis];
      int k = 2;
      for (int i : detail::others(n, axis, 1)) c[k++] = x[i] / x[axis];
      c[n] = p.fsign / xi[axis];
      c[n + 1] = xi[0] / (xi[axis] * xi[axis]);
      k = n + 2;
      for (int i : detail::others(n, axis, 1)) c[k++] = xi[i] / xi[axis];
      break;
    }
  }
  return p;
}

// Inverse of to_chart; needs rho > 0 (and rho_f > 0 for the parabolic chart).
inline std::pair<Vec3, Vec3> from_chart(const PhasePointChart& p) {
  const int n = p.n;
  const auto& c = p.c;
  Vec3 x{0, 0, 0}, xi{0, 0, 0};
  if (p.kind != ChartKind::interior && !(c[0] > 0)) throw std::invalid_argument("from_chart: boundary point has no interior preimage");
  switch (p.kind) {
    case ChartKind::interior:
      for (int i = 0; i < n; ++i) {
        x[i] = c[i];
        xi[i] = c[n + i];
      }
      break;
    case ChartKind::spatial: {
      x[p.axis] = p.sign / c[0];
      int k = 1;
      for (int i : detail::others(n, p.axis)) x[i] = c[k++] * x[p.axis];
      for (int i = 0; i < n; ++i) xi[i] = c[n + i];
      break;
    }
    case ChartKind::fibre: {
      xi[p.axis] = p.sign / c[0];
      int k = 1;
      for (int i : detail::others(n, p.axis)) xi[i] = c[k++] * xi[p.axis];
      for (int i = 0; i < n; ++i) x[i] = c[n + i];
      break;
    }
    case ChartKind::kg: {
      x[0] = p.sign / c[0];
      xi[0] = c[n];
      for (int i = 1; i < n; ++i) {
        xi[i] = c[n + i];
        x[i] = (c[i] - xi[i]) * x[0] / xi[0];
      }
      break;
    }
    case ChartKind::parabolic: {
      if (!(c[n] > 0)) throw std::invalid_argument("from_chart: parabolic point at frequency infinity");
      x[p.axis] = p.sign / c[0];
      x[0] = c[1] * x[p.axis];
      int k = 2;
      for (int i : detail::others(n, p.axis, 1)) x[i] = c[k++] * x[p.axis];
      xi[p.axis] = p.fsign / c[n];
      xi[0] = c[n + 1] * xi[p.axis] * xi[p.axis];
      k = n + 2;
      for (int i : detail::others(n, p.axis, 1)) xi[i] = c[k++] * xi[p.axis];
      break;
    }
  }
  return {x, xi};
}

// Spatial chart point at spatial infinity in direction xhat (axis = dominant component).
inline PhasePointChart boundary_point(int n, const Vec3& xhat, const Vec3& xi) {
  int j = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(xhat[i]) > std::abs(xhat[j])) j = i;
  PhasePointChart p = to_chart(ChartKind::spatial, n, j, xhat, xi);
  p.c[0] = 0;
  return p;
}

// Unit direction of the base point of a spatial-chart point (valid at rho = 0).
inline Vec3 base_direction(const PhasePointChart& p) {
  if (p.kind != ChartKind::spatial) throw std::invalid_argument("base_direction: spatial chart expected");
  Vec3 w{0, 0, 0};
  w[p.axis] = p.sign;
  int k = 1;
  for (int i : detail::others(p.n, p.axis)) w[i] = p.sign * p.c[k++];
  double r = std::sqrt(norm2(w, p.n));
  for (int i = 0; i < p.n; ++i) w[i] /= r;
  return w;
}

// Re-express a spatial-chart point in the chart of another dominant axis (also at rho = 0).
inline PhasePointChart switch_axis(const PhasePointChart& p, int axis) {
  if (p.kind != ChartKind::spatial) throw std::invalid_argument("switch_axis: spatial chart expected");
  Vec3 w{0, 0, 0};
  w[p.axis] = p.sign;
  int k = 1;
  for (int i : detail::others(p.n, p.axis)) w[i] = p.sign * p.c[k++];
  if (w[axis] == 0) throw std::invalid_argument("switch_axis: target axis not dominant anywhere near the point");
  PhasePointChart q = p;
  q.axis = axis;
  q.sign = detail::sgn(w[axis]);
  // x = w / rho, so rho' = sign'/x_axis = rho / |w_axis|
  q.c[0] = p.c[0] / std::abs(w[axis]);
  k = 1;
  for (int i : detail::others(p.n, axis)) q.c[k++] = w[i] / w[axis];
  return q;
}

namespace detail {

// Analytic pushforward of (x', xi') into chart coordinates, times the chart rescaling.
inline std::array<double, 6> pushforward(const SymbolHamiltonian& H, const PhasePointChart& p) {
  const int n = p.n;
  const auto& c = p.c;
  auto [x, xi] = from_chart(p);
  auto [xd, kd] = hamilton_field(H, x, xi);
  std::array<double, 6> f{};
  switch (p.kind) {
    case ChartKind::interior:
      for (int i = 0; i < n; ++i) {
        f[i] = xd[i];
        f[n + i] = kd[i];
      }
      return f;
    case ChartKind::spatial: {
      const double rho = c[0], s = p.sign;
      const int j = p.axis;
      f[0] = -s * rho * rho * xd[j];
      int k = 1;
      for (int i : others(n, j)) {
        f[k] = s * rho * (xd[i] - c[k] * xd[j]);
        ++k;
      }
      for (int i = 0; i < n; ++i) f[n + i] = kd[i];
      const double w = H.boundary_scale * std::pow(rho, H.p.l - 1);
      for (auto& v : f) v *= w;
      return f;
    }
    case ChartKind::fibre: {
      const double rho = c[0], s = p.sign;
      const int j = p.axis;
      f[0] = -s * rho * rho * kd[j];
      int k = 1;
      for (int i : others(n, j)) {
        f[k] = s * rho * (kd[i] - c[k] * kd[j]);
        ++k;
      }
      for (int i = 0; i < n; ++i) f[n + i] = xd[i];
      const double w = H.boundary_scale * std::pow(rho, H.p.m - 1);
      for (auto& v : f) v *= w;
      return f;
    }
    case ChartKind::kg: {
      const double rho = c[0], s = p.sign, tau = xi[0];
      f[0] = -s * rho * rho * xd[0];
      for (int i = 1; i < n; ++i) {
        // v = s rho tau x + xi
        f[i] = s * (f[0] * tau * x[i] + rho * kd[0] * x[i] + rho * tau * xd[i]) + kd[i];
      }
      for (int i = 0; i < n; ++i) f[n + i] = kd[i];
      const double w = H.boundary_scale * std::pow(rho, H.p.l - 1);
      for (auto& v : f) v *= w;
      return f;
    }
    case ChartKind::parabolic: {
      const int j = p.axis;
      const double rb = c[0], rf = c[n], s = p.sign, q = p.fsign;
      f[0] = -s * rb * rb * xd[j];
      f[1] = s * rb * (xd[0] - c[1] * xd[j]);
      int k = 2;
      for (int i : others(n, j, 1)) {
        f[k] = s * rb * (xd[i] - c[k] * xd[j]);
        ++k;
      }
      f[n] = -q * rf * rf * kd[j];
      f[n + 1] = rf * rf * kd[0] - 2 * q * c[n + 1] * rf * kd[j];
      k = n + 2;
      for (int i : others(n, j, 1)) {
        f[k] = q * rf * (kd[i] - c[k] * kd[j]);
        ++k;
      }
      const double w = H.boundary_scale * rf / rb;
      for (auto& v : f) v *= w;
      return f;
    }
  }
  return f;
}

// Boundary-rescaled symbol at an interior chart point.
inline double chart_symbol_interior(const SymbolHamiltonian& H, const PhasePointChart& p) {
  auto [x, xi] = from_chart(p);
  double v = H.p(x, xi).real();
  switch (p.kind) {
    case ChartKind::spatial:
    case ChartKind::kg: return v * std::pow(p.c[0], H.p.l);
    case ChartKind::fibre: return v * std::pow(p.c[0], H.p.m);
    case ChartKind::parabolic: return v * p.c[p.n] * p.c[p.n];
    default: return v;
  }
}

// Limit rho -> 0 from rho = d, d/2, d/4 assuming smoothness in rho.
template <class F>
auto richardson_rho(F&& f, const PhasePointChart& p, double d = 1e-3) {
  auto at = [&](double r) {
    PhasePointChart q = p;
    q.c[0] = r;
    return f(q);
  };
  auto f1 = at(d), f2 = at(d / 2), f4 = at(d / 4);
  auto out = f1;
  for (size_t i = 0; i < std::size(out); ++i) out[i] = (8 * f4[i] - 6 * f2[i] + f1[i]) / 3;
  return out;
}

// Closed forms for the named models; returns false when not available for this chart.
inline bool closed_field(const SymbolHamiltonian& H, const PhasePointChart& p, std::array<double, 6>& f) {
  const int n = p.n;
  const auto& c = p.c;
  const double s = p.sign;
  f.fill(0);
  switch (H.model) {
    case Model::helmholtz:
      if (p.kind != ChartKind::spatial) return false;
      {
        const int j = p.axis;
        const double xij = c[n + j];
        f[0] = -s * xij * c[0];
        int k = 1;
        for (int i : others(n, j)) {
          f[k] = s * (c[n + i] - c[k] * xij);
          ++k;
        }
      }
      return true;
    case Model::d_x1:
      if (p.kind != ChartKind::spatial) return false;
      {
        const int j = p.axis;
        f[0] = j == 0 ? -s * c[0] : 0;
        int k = 1;
        for (int i : others(n, j)) {
          f[k] = s * ((i == 0 ? 1.0 : 0.0) - (j == 0 ? c[k] : 0.0));
          ++k;
        }
      }
      return true;
    case Model::xDx:
      if (p.kind == ChartKind::spatial) {
        f[0] = -c[0];
        f[1] = -c[1];
        return true;
      }
      if (p.kind == ChartKind::fibre) {
        f[0] = c[0];
        f[1] = c[1];
        return true;
      }
      return false;
    case Model::klein_gordon:
      if (p.kind != ChartKind::kg) return false;
      {
        const double tau = c[n];
        f[0] = -2 * s * tau * c[0];
        for (int i = 1; i < n; ++i) f[i] = -2 * s * tau * c[i];
      }
      return true;
    case Model::schrodinger:
      if (p.kind == ChartKind::spatial && p.axis == 0) {
        f[0] = -s * c[0];
        for (int i = 1; i < n; ++i) f[i] = s * (2 * c[n + i] - c[i]);
        return true;
      }
      if (p.kind == ChartKind::parabolic) {
        const double kq = s * p.fsign;
        f[0] = -2 * kq * c[0];
        f[1] = kq * (p.fsign * c[n] - 2 * c[1]);
        for (int k = 2; k < n; ++k) f[k] = 2 * kq * (c[n + k] - c[k]);
        return true;
      }
      return false;
    default: return false;
  }
}

inline bool closed_symbol(const SymbolHamiltonian& H, const PhasePointChart& p, double& v) {
  const int n = p.n;
  const auto& c = p.c;
  switch (H.model) {
    case Model::helmholtz:
      if (p.kind != ChartKind::spatial) return false;
      v = -H.lambda * H.lambda;
      for (int i = 0; i < n; ++i) v += c[n + i] * c[n + i];
      return true;
    case Model::d_x1:
      if (p.kind != ChartKind::spatial) return false;
      v = c[n];
      return true;
    case Model::xDx:
      if (p.kind != ChartKind::spatial && p.kind != ChartKind::fibre) return false;
      v = p.sign * c[1];
      return true;
    case Model::klein_gordon:
    case Model::wave:
      if (p.kind != ChartKind::kg && !(p.kind == ChartKind::spatial && p.axis == 0)) return false;
      v = c[n] * c[n] - H.mass * H.mass;
      for (int i = 1; i < n; ++i) v -= c[n + i] * c[n + i];
      return true;
    case Model::schrodinger:
      if (p.kind == ChartKind::spatial && p.axis == 0) {
        v = c[n];
        for (int i = 1; i < n; ++i) v += c[n + i] * c[n + i];
        return true;
      }
      if (p.kind == ChartKind::parabolic) {
        v = c[n + 1] + 1;
        for (int k = n + 2; k < 2 * n; ++k) v += c[k] * c[k];
        return true;
      }
      return false;
    default: return false;
  }
}

}  // namespace detail

struct ChartField {
  std::array<double, 6> v{};
  bool closed_form = false;
  bool tangent = true;  // d_rho coefficient vanishes at rho = 0
};

// Rescaled Hamilton field in chart coordinates. Closed forms for the named models
// unless force_generic; otherwise the rho -> 0 limit of the rescaled pushforward.
inline ChartField boundary_chart_field(const SymbolHamiltonian& H, const PhasePointChart& p, bool force_generic = false) {
  ChartField out;
  if (p.kind == ChartKind::interior) {
    auto [x, xi] = from_chart(p);
    auto [xd, kd] = hamilton_field(H, x, xi);
    for (int i = 0; i < p.n; ++i) {
      out.v[i] = xd[i];
      out.v[p.n + i] = kd[i];
    }
    return out;
  }
  if (!force_generic && detail::closed_field(H, p, out.v)) {
    out.closed_form = true;
  } else if (p.c[0] > 0) {
    out.v = detail::pushforward(H, p);
  } else {
    out.v = detail::richardson_rho([&](const PhasePointChart& q) { return detail::pushforward(H, q); }, p);
  }
  if (p.c[0] == 0.0) {
    double scale = 1;
    for (size_t i = 0; i < p.size(); ++i) scale = std::max(scale, std::abs(out.v[i]));
    out.tangent = std::abs(out.v[0]) <= 1e-9 * scale;
    if (out.tangent) out.v[0] = 0;
  }
  return out;
}

// Boundary-rescaled principal symbol in chart coordinates (its zero set is Char).
inline double chart_symbol(const SymbolHamiltonian& H, const PhasePointChart& p, bool force_generic = false) {
  double v;
  if (!force_generic && detail::closed_symbol(H, p, v)) return v;
  if (p.kind == ChartKind::interior || p.c[0] > 0) return detail::chart_symbol_interior(H, p);
  auto lim = detail::richardson_rho(
      [&](const PhasePointChart& q) { return std::array<double, 1>{detail::chart_symbol_interior(H, q)}; }, p);
  return lim[0];
}

// ---- trajectories ---------------------------------------------------------

struct TrajectoryOptions {
  double switch_below = 0.45;  // leave a chart when |x_j|/|x| drops below this
};

namespace detail {

// Factor turning the chart field into the |x|-rescaled field (chart independent time).
inline double time_factor(const PhasePointChart& p) {
  if (p.kind != ChartKind::spatial) return 1;
  double s = 1;
  for (int k = 1; k < p.n; ++k) s += p.c[k] * p.c[k];
  return std::sqrt(s);
}

inline std::array<double, 6> flow_rhs(const SymbolHamiltonian& H, const PhasePointChart& p) {
  auto f = boundary_chart_field(H, p).v;
  double w = time_factor(p);
  for (auto& v : f) v *= w;
  return f;
}

inline PhasePointChart maybe_switch(const PhasePointChart& p, const TrajectoryOptions& opt) {
  if (p.kind != ChartKind::spatial) return p;
  double ratio = 1 / time_factor(p);
  if (ratio >= opt.switch_below) return p;
  Vec3 w = base_direction(p);
  int j = 0;
  for (int i = 1; i < p.n; ++i)
    if (std::abs(w[i]) > std::abs(w[j])) j = i;
  return switch_axis(p, j);
}

}  // namespace detail

// RK4 on the rescaled field. Interior starts follow H_p itself; boundary starts follow
// |x| H (chart field times |x|/|x_j|) with chart switching at the dominance threshold.
inline std::vector<PhasePointChart> flow_trajectory(const SymbolHamiltonian& H, const PhasePointChart& start, double T, double dt,
                                                    const TrajectoryOptions& opt = {}) {
  if (!(std::abs(dt) > 0) || std::abs(dt) > 0.01) throw std::invalid_argument("flow_trajectory: need 0 < |dt| <= 0.01");
  const double h = T >= 0 ? std::abs(dt) : -std::abs(dt);
  const long steps = std::lround(std::abs(T) / std::abs(dt));
  std::vector<PhasePointChart> path{start};
  path.reserve(steps + 1);
  PhasePointChart cur = start;
  const size_t m = cur.size();
  const bool pinned = cur.kind != ChartKind::interior && cur.c[0] == 0.0;
  for (long s = 0; s < steps; ++s) {
    auto add = [&](const PhasePointChart& base, const std::array<double, 6>& k, double a) {
      PhasePointChart q = base;
      for (size_t i = 0; i < m; ++i) q.c[i] += a * k[i];
      if (pinned) q.c[0] = 0;
      return q;
    };
    auto k1 = detail::flow_rhs(H, cur);
    auto k2 = detail::flow_rhs(H, add(cur, k1, h / 2));
    auto k3 = detail::flow_rhs(H, add(cur, k2, h / 2));
    auto k4 = detail::flow_rhs(H, add(cur, k3, h));
    for (size_t i = 0; i < m; ++i) cur.c[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if (pinned) cur.c[0] = 0;
    if (cur.kind != ChartKind::interior && cur.c[0] < 0) throw NumericalError("flow_trajectory: left the compactified space");
    cur = detail::maybe_switch(cur, opt);
    path.push_back(cur);
  }
  return path;
}

// CSV: step, chart id, coordinates..., |p|
inline std::string trajectory_csv(const SymbolHamiltonian& H, const std::vector<PhasePointChart>& path) {
  std::ostringstream s;
  s.precision(17);
  size_t m = path.empty() ? 0 : path.front().size();
  s << "step,chart";
  for (size_t i = 0; i < m; ++i) s << ",c" << i;
  s << ",abs_p\n";
  for (size_t k = 0; k < path.size(); ++k) {
    s << k << "," << path[k].id();
    for (size_t i = 0; i < m; ++i) s << "," << path[k].c[i];
    s << "," << std::abs(chart_symbol(H, path[k])) << "\n";
  }
  return s.str();
}

// ---- radial sets -----------------------------------------------------------

enum class RadialVerdict { source, sink, saddle, degenerate };

inline const char* verdict_name(RadialVerdict v) {
  switch (v) {
    case RadialVerdict::source: return "source";
    case RadialVerdict::sink: return "sink";
    case RadialVerdict::saddle: return "saddle";
    default: return "degenerate";
  }
}

constexpr double eig_tolerance = 1e-6;

// Jacobian of the chart field in chart coordinates; d/drho one-sided at rho = 0.
inline Eigen::MatrixXd chart_jacobian(const SymbolHamiltonian& H, const PhasePointChart& p) {
  const size_t m = p.size();
  Eigen::MatrixXd J(m, m);
  auto F = [&](const PhasePointChart& q) { return boundary_chart_field(H, q).v; };
  for (size_t k = 0; k < m; ++k) {
    double h = 1e-5 * std::max(1.0, std::abs(p.c[k]));
    PhasePointChart a = p, b = p;
    if (k == 0 && p.kind != ChartKind::interior) {
      PhasePointChart c2 = p;
      a.c[0] = p.c[0] + h;
      c2.c[0] = p.c[0] + 2 * h;
      auto f0 = F(p), f1 = F(a), f2 = F(c2);
      for (size_t i = 0; i < m; ++i) J(i, k) = (-3 * f0[i] + 4 * f1[i] - f2[i]) / (2 * h);
      continue;
    }
    a.c[k] += h;
    b.c[k] -= h;
    auto fa = F(a), fb = F(b);
    for (size_t i = 0; i < m; ++i) J(i, k) = (fa[i] - fb[i]) / (2 * h);
  }
  return J;
}

struct Classification {
  RadialVerdict verdict = RadialVerdict::degenerate;
  std::vector<cplx> eigenvalues;
  std::vector<int> active;  // rho plus the coordinates whose field row is not identically zero
};

// Eigenvalues of the Jacobian restricted to rho and the non-frozen coordinates
// (frozen rows vanish, so the full spectrum is this block plus zeros).
inline Classification classify_radial(const SymbolHamiltonian& H, const PhasePointChart& p) {
  Eigen::MatrixXd J = chart_jacobian(H, p);
  Classification c;
  const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
  for (int i = 0; i < static_cast<int>(p.size()); ++i)
    if (i == 0 || J.row(i).cwiseAbs().maxCoeff() > 1e-9 * scale) c.active.push_back(i);
  Eigen::MatrixXd S(c.active.size(), c.active.size());
  for (size_t a = 0; a < c.active.size(); ++a)
    for (size_t b = 0; b < c.active.size(); ++b) S(a, b) = J(c.active[a], c.active[b]);
  Eigen::EigenSolver<Eigen::MatrixXd> es(S);
  int pos = 0, neg = 0;
  bool small = false;
  for (int i = 0; i < S.rows(); ++i) {
    cplx e = es.eigenvalues()(i);
    c.eigenvalues.push_back(e);
    if (std::abs(e.real()) < eig_tolerance) small = true;
    (e.real() > 0 ? pos : neg)++;
  }
  std::sort(c.eigenvalues.begin(), c.eigenvalues.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  if (small)
    c.verdict = RadialVerdict::degenerate;
  else if (neg == 0)
    c.verdict = RadialVerdict::source;
  else if (pos == 0)
    c.verdict = RadialVerdict::sink;
  else
    c.verdict = RadialVerdict::saddle;
  return c;
}

struct ThresholdData {
  double beta0 = 0, beta1 = 0, threshold_order = -0.5;
};

// beta0 = lim H(c rho)/(c rho), beta1 = lim H(varrho)/varrho with varrho the squared
// distance to the point in the active non-rho coordinates; both by two-level Richardson.
inline ThresholdData threshold_data(const SymbolHamiltonian& H, const PhasePointChart& p, double rho_scale = 1) {
  if (p.kind == ChartKind::interior || p.c[0] != 0.0) throw std::invalid_argument("threshold_data: boundary point expected");
  Classification cl = classify_radial(H, p);
  if (cl.verdict == RadialVerdict::degenerate)
    throw PreconditionError(
        "degenerate radial point: beta0 vanishes (as for the wave operator, whose characteristic set meets the zero "
        "section over the light cone), so no threshold commutant exists");
  auto F = [&](const PhasePointChart& q) { return boundary_chart_field(H, q).v; };
  auto rich = [](auto&& g, double e) { return (8 * g(e / 4) - 6 * g(e / 2) + g(e)) / 3; };
  ThresholdData t;
  t.beta0 = rich(
      [&](double e) {
        PhasePointChart q = p;
        q.c[0] = e;
        return rho_scale * F(q)[0] / (rho_scale * e);
      },
      1e-3);
  std::vector<int> dirs(cl.active.begin() + 1, cl.active.end());
  if (dirs.empty()) {
    t.beta1 = NAN;
    return t;
  }
  const double u = 1 / std::sqrt(static_cast<double>(dirs.size()));
  t.beta1 = rich(
      [&](double e) {
        PhasePointChart q = p;
        for (int k : dirs) q.c[k] += e * u;
        auto f = F(q);
        double hv = 0;
        for (int k : dirs) hv += 2 * (q.c[k] - p.c[k]) * f[k];
        return hv / (e * e);
      },
      1e-3);
  return t;
}

struct RadialSetReport {
  std::vector<PhasePointChart> points;
  std::vector<std::vector<cplx>> jacobian_eigenvalues;
  std::vector<RadialVerdict> verdict;
  std::vector<double> beta0, beta1;
  double threshold_order = -0.5;
  size_t count(RadialVerdict v) const { return static_cast<size_t>(std::count(verdict.begin(), verdict.end(), v)); }
};

struct ChartSpec {
  ChartKind kind;
  int axis, sign, fsign;
  std::vector<std::pair<double, double>> box;  // seed box for coordinates 1..2n-1
};

namespace detail {

inline std::vector<ChartSpec> radial_charts(const SymbolHamiltonian& H) {
  const int n = H.n();
  std::vector<ChartSpec> out;
  auto spatial = [&](double xi_box) {
    for (int j = 0; j < n; ++j)
      for (int s : {1, -1}) {
        ChartSpec c{ChartKind::spatial, j, s, 1, {}};
        for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
        for (int k = 0; k < n; ++k) c.box.push_back({-xi_box, xi_box});
        out.push_back(c);
      }
  };
  switch (H.model) {
    case Model::helmholtz: spatial(1.2 * H.lambda); break;
    case Model::d_x1: spatial(1.0); break;
    case Model::xDx:
      for (int s : {1, -1}) {
        out.push_back({ChartKind::spatial, 0, s, 1, {{-1, 1}}});
        out.push_back({ChartKind::fibre, 0, s, 1, {{-1, 1}}});
      }
      break;
    case Model::klein_gordon:
      for (int s : {1, -1}) {
        ChartSpec c{ChartKind::kg, 0, s, 1, {}};
        for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
        c.box.push_back({0.25 * H.mass, 3 * H.mass});
        for (int k = 1; k < n; ++k) c.box.push_back({-2 * H.mass, 2 * H.mass});
        out.push_back(c);
      }
      break;
    case Model::wave:
      for (int s : {1, -1}) {
        ChartSpec c{ChartKind::spatial, 0, s, 1, {}};
        for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
        for (int k = 0; k < n; ++k) c.box.push_back({-1, 1});
        out.push_back(c);
      }
      break;
    case Model::schrodinger:
      for (int s : {1, -1}) {
        ChartSpec c{ChartKind::spatial, 0, s, 1, {}};
        for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
        c.box.push_back({-2, 0});
        for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
        out.push_back(c);
      }
      for (int j = 1; j < n; ++j)
        for (int s : {1, -1})
          for (int q : {1, -1}) {
            ChartSpec c{ChartKind::parabolic, j, s, q, {}};
            for (int k = 1; k < n; ++k) c.box.push_back({-1, 1});
            c.box.push_back({0.1, 1});
            c.box.push_back({-2, 0});
            for (int k = n + 2; k < 2 * n; ++k) c.box.push_back({-1, 1});
            out.push_back(c);
          }
      break;
    default: spatial(2.0); break;
  }
  return out;
}

inline bool dominant(const PhasePointChart& p) {
  const int n = p.n;
  const auto& c = p.c;
  switch (p.kind) {
    case ChartKind::spatial:
    case ChartKind::fibre:
      for (int k = 1; k < n; ++k)
        if (std::abs(c[k]) > 1 + 1e-9) return false;
      return true;
    case ChartKind::kg: {
      // |x/t| = |v - xi| / tau < 1
      double r = 0;
      for (int i = 1; i < n; ++i) r += (c[i] - c[n + i]) * (c[i] - c[n + i]);
      return c[n] > 0 && std::sqrt(r) < c[n];
    }
    case ChartKind::parabolic:
      for (int k = 1; k < n; ++k)
        if (std::abs(c[k]) > 1 + 1e-9) return false;
      return c[n] > 0;
    default: return true;
  }
}

}  // namespace detail

// Boundary zeros of the chart field on Char: seeds on a product grid with `res` points
// per coordinate, least-norm Newton on (field, symbol) with rho = 0, kept when the
// point lies in its own chart's dominance region. Corners are not scanned.
inline std::vector<PhasePointChart> find_radial_points(const SymbolHamiltonian& H, int res = 5, double dedupe = 1e-3) {
  if (res < 2) throw std::invalid_argument("find_radial_points: res must be >= 2");
  std::vector<PhasePointChart> found;
  for (const ChartSpec& cs : detail::radial_charts(H)) {
    const size_t dim = cs.box.size();
    const int n = H.n();
    size_t total = 1;
    for (size_t d = 0; d < dim; ++d) total *= res;
    for (size_t flat = 0; flat < total; ++flat) {
      PhasePointChart p;
      p.kind = cs.kind;
      p.n = n;
      p.axis = cs.axis;
      p.sign = cs.sign;
      p.fsign = cs.fsign;
      size_t r = flat;
      for (size_t d = 0; d < dim; ++d) {
        int i = static_cast<int>(r % res);
        r /= res;
        auto [lo, hi] = cs.box[d];
        p.c[d + 1] = lo + (hi - lo) * (i + 0.5) / res;
      }
      auto residual = [&](const PhasePointChart& q) {
        auto f = boundary_chart_field(H, q).v;
        Eigen::VectorXd g(dim + 1);
        for (size_t d = 0; d < dim; ++d) g[d] = f[d + 1];
        g[dim] = chart_symbol(H, q);
        return g;
      };
      bool ok = false;
      for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd g = residual(p);
        if (!g.allFinite()) break;
        if (g.norm() < 1e-12) {
          ok = true;
          break;
        }
        Eigen::MatrixXd J(dim + 1, dim);
        for (size_t d = 0; d < dim; ++d) {
          double h = 1e-7 * std::max(1.0, std::abs(p.c[d + 1]));
          PhasePointChart a = p, b = p;
          a.c[d + 1] += h;
          b.c[d + 1] -= h;
          J.col(d) = (residual(a) - residual(b)) / (2 * h);
        }
        Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-g);
        for (size_t d = 0; d < dim; ++d) p.c[d + 1] += step[d];
        if (cs.kind == ChartKind::parabolic && !(p.c[n] > 0)) break;
      }
      if (!ok) {
        Eigen::VectorXd g = residual(p);
        ok = g.allFinite() && g.norm() < 1e-10;
      }
      if (!ok || !detail::dominant(p)) continue;
      bool dup = false;
      for (auto& q : found) {
        if (q.kind != p.kind || q.axis != p.axis || q.sign != p.sign || q.fsign != p.fsign) continue;
        double d = 0;
        for (size_t i = 0; i < p.size(); ++i) d = std::max(d, std::abs(q.c[i] - p.c[i]));
        if (d < dedupe) {
          dup = true;
          break;
        }
      }
      if (!dup) found.push_back(p);
    }
  }
  return found;
}

inline RadialSetReport analyze_radial_sets(const SymbolHamiltonian& H, int res = 5) {
  RadialSetReport rep;
  rep.points = find_radial_points(H, res);
  for (auto& p : rep.points) {
    Classification c = classify_radial(H, p);
    rep.jacobian_eigenvalues.push_back(c.eigenvalues);
    rep.verdict.push_back(c.verdict);
    if (c.verdict == RadialVerdict::degenerate) {
      rep.beta0.push_back(NAN);
      rep.beta1.push_back(NAN);
    } else {
      ThresholdData t = threshold_data(H, p);
      rep.beta0.push_back(t.beta0);
      rep.beta1.push_back(t.beta1);
    }
  }
  return rep;
}

// ---- Helmholtz boundary geometry ----------------------------------------------

struct HelmholtzBoundaryData {
  Vec3 xhat{}, xi{};
  double tau = 0;  // dual to -D_r: tau = -xi . xhat
  double mu = 0;   // |xi - (xi . xhat) xhat|
};

inline HelmholtzBoundaryData helmholtz_boundary_data(const PhasePointChart& p) {
  HelmholtzBoundaryData d;
  d.xhat = base_direction(p);
  for (int i = 0; i < p.n; ++i) d.xi[i] = p.c[p.n + i];
  double r = dot(d.xi, d.xhat, p.n);
  d.tau = -r;
  Vec3 t{0, 0, 0};
  for (int i = 0; i < p.n; ++i) t[i] = d.xi[i] - r * d.xhat[i];
  d.mu = std::sqrt(norm2(t, p.n));
  return d;
}

// Distance of a Helmholtz boundary point to the outgoing radial set {xhat = xi/|xi|}.
inline double distance_to_outgoing(const PhasePointChart& p) {
  auto d = helmholtz_boundary_data(p);
  double r = std::sqrt(norm2(d.xi, p.n)), s = 0;
  for (int i = 0; i < p.n; ++i) s += (d.xhat[i] - d.xi[i] / r) * (d.xhat[i] - d.xi[i] / r);
  return std::sqrt(s);
}

// Quadratic defining functions q_i = rho_i^2 + |omega_i - y_i|^2 of the outgoing set in
// the two overlapping charts x_0 > 0 and x_1 > 0 (n = 2), glued by a partition of unity
// chi_0 + chi_1 = 1. The cross term C = sum_i q_i H chi_i is evaluated at distance delta
// from the radial point over xhat = (1,1)/sqrt2; returns the fitted exponent of C(delta).
inline LineFit glue_cross_term_fit(double lambda, const std::vector<double>& deltas) {
  const double th0 = pi / 4;
  auto w = [](double u) { return u * u * u * u; };
  auto chi0 = [&](double th) {
    double a = w(std::cos(th) * std::cos(th)), b = w(std::sin(th) * std::sin(th));
    return a / (a + b);
  };
  std::vector<double> d, c;
  for (double delta : deltas) {
    const double rho = 0.6 * delta, th = th0 + 0.8 * delta, phi = th0 - 0.5 * delta;
    const double r = 1 / rho;
    Vec3 x{r * std::cos(th), r * std::sin(th), 0}, xi{lambda * std::cos(phi), lambda * std::sin(phi), 0};
    // q in the x_0-dominant and x_1-dominant charts
    double q0 = std::pow(1 / x[0], 2) + std::pow(xi[1] / xi[0] - x[1] / x[0], 2);
    double q1 = std::pow(1 / x[1], 2) + std::pow(xi[0] / xi[1] - x[0] / x[1], 2);
    // |x| H_{p/2} chi_0 = chi_0'(theta) |x| theta', theta' = (x_0 xi_1 - x_1 xi_0)/|x|^2
    double h = 1e-6;
    double dchi = (chi0(th + h) - chi0(th - h)) / (2 * h);
    double Hchi0 = dchi * (x[0] * xi[1] - x[1] * xi[0]) / r;
    double C = q0 * Hchi0 + q1 * (-Hchi0);
    d.push_back(delta);
    c.push_back(std::abs(C));
  }
  return fit_loglog(d, c);
}

}  // namespace scatcalc

#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>

#include <memory>

#include "grid.hpp"

namespace scatcalc {

using MultiIndex = std::array<int, 3>;

inline int order_of(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

inline double factorial(const MultiIndex& a) {
  double f = 1;
  for (int v : a)
    for (int i = 2; i <= v; ++i) f *= i;
  return f;
}

struct Symbol {
  using Eval = std::function<cplx(const Vec3&, const Vec3&)>;
  // d^alpha_x d^beta_xi a (plain partials, not D = -i d).
  using Partial = std::function<cplx(const Vec3&, const Vec3&, const MultiIndex&, const MultiIndex&)>;

  int n = 1;
  Eval eval;
  double m = 0, l = 0;
  bool classical = true;
  std::function<double(const Vec3&, const Vec3&)> variable_order;
  Partial partial;  // optional analytic derivatives

  cplx operator()(const Vec3& x, const Vec3& xi) const { return eval(x, xi); }
};

inline Symbol make_symbol(int n, Symbol::Eval f, double m, double l) {
  Symbol s;
  s.n = n;
  s.eval = std::move(f);
  s.m = m;
  s.l = l;
  return s;
}

inline Symbol constant_symbol(int n, cplx c) {
  return make_symbol(n, [c](const Vec3&, const Vec3&) { return c; }, 0, 0);
}

namespace detail {

inline double fd_step(int order, double scale) {
  static constexpr double c[] = {0, 1e-4, 1e-3, 1e-2, 2e-2, 3e-2, 4e-2};
  return c[std::min(order, 6)] * scale;
}

// Mixed partial by nested central differences; variable v < n is x_v, v >= n is xi_{v-n}.
template <class F>
cplx nested_partial(const F& f, Vec3 x, Vec3 xi, int n, std::array<int, 6> ord) {
  int v = -1;
  for (int i = 0; i < 2 * n; ++i)
    if (ord[i] > 0) {
      v = i;
      break;
    }
  if (v < 0) return f(x, xi);
  int k = ord[v];
  ord[v] = 0;
  double base = v < n ? x[v] : xi[v - n];
  double scale = v < n ? jp(x, n) : jp(xi, n);
  double h = fd_step(k, scale);
  auto g = [&](double s) {
    Vec3 xx = x, yy = xi;
    if (v < n)
      xx[v] = base + s;
    else
      yy[v - n] = base + s;
    return nested_partial(f, xx, yy, n, ord);
  };
  return central_derivative<cplx>(g, k, h);
}

}  // namespace detail

// d^alpha_x d^beta_xi a(x, xi)
inline cplx partial(const Symbol& a, const Vec3& x, const Vec3& xi, const MultiIndex& alpha, const MultiIndex& beta) {
  if (a.partial) return a.partial(x, xi, alpha, beta);
  std::array<int, 6> ord{0, 0, 0, 0, 0, 0};
  for (int i = 0; i < a.n; ++i) {
    ord[i] = alpha[i];
    ord[a.n + i] = beta[i];
  }
  return detail::nested_partial(a.eval, x, xi, a.n, ord);
}

// All multi-indices in n variables with |alpha| <= k (or == k when exact).
inline std::vector<MultiIndex> multi_indices(int n, int k, bool exact = false) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= k; ++a)
    for (int b = 0; b <= (n > 1 ? k : 0); ++b)
      for (int c = 0; c <= (n > 2 ? k : 0); ++c) {
        int s = a + b + c;
        if (s > k || (exact && s != k)) continue;
        out.push_back({a, b, c});
      }
  return out;
}

// Matrix realization of Op_L(a) on the grid; rows index x, columns index y.
struct DenseOperator {
  GridSpec spec;
  Eigen::MatrixXcd matrix;
  double m = 0, l = 0;

  GridField apply(const GridField& u) const {
    Eigen::Map<const Eigen::VectorXcd> v(u.values.data(), u.values.size());
    Eigen::VectorXcd w = matrix * v;
    GridField out(spec);
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = w[i];
    return out;
  }
  DenseOperator operator*(const DenseOperator& o) const {
    return {spec, matrix * o.matrix, m + o.m, l + o.l};
  }
  static DenseOperator identity(const GridSpec& s) {
    return {s, Eigen::MatrixXcd::Identity(s.size(), s.size()), 0, 0};
  }
};

inline void check_quantize_budget(const GridSpec& s) {
  if ((s.n == 1 && s.N > 512) || (s.n == 2 && s.N > 64) || s.n == 3 && s.N > 16)
    throw ConfigError("dense quantization budget exceeded (N <= 512 for n=1, 64 for n=2, 16 for n=3)");
}

namespace detail {

inline Eigen::MatrixXcd phase_matrix(const GridSpec& s) {
  const size_t M = s.size();
  Eigen::MatrixXcd E(M, M);
  for (size_t i = 0; i < M; ++i) {
    Vec3 x = s.point(i);
    for (size_t k = 0; k < M; ++k) E(i, k) = std::polar(1.0, dot(x, s.freq(k), s.n));
  }
  return E;
}

}  // namespace detail

// Left quantization: M_ij = N^-n sum_k e^{i(x_i - x_j).xi_k} a(x_i, xi_k).
// With right = true the symbol is evaluated at (x_j, xi_k) instead.
inline DenseOperator quantize(const Symbol& a, const GridSpec& s, bool right = false) {
  check_quantize_budget(s);
  const size_t M = s.size();
  Eigen::MatrixXcd E = detail::phase_matrix(s);
  Eigen::MatrixXcd A(M, M);
  for (size_t i = 0; i < M; ++i) {
    Vec3 x = s.point(i);
    for (size_t k = 0; k < M; ++k) A(i, k) = a(x, s.freq(k));
  }
  DenseOperator op{s, {}, a.m, a.l};
  const double scale = 1.0 / static_cast<double>(M);
  if (!right) {
    op.matrix = scale * (A.cwiseProduct(E) * E.adjoint());
  } else {
    // B_jk = a(x_j, xi_k) e^{-i x_j.xi_k}
    Eigen::MatrixXcd B = A.cwiseProduct(E.conjugate());
    op.matrix = scale * (E * B.transpose());
  }
  return op;
}

// Matrix-free Op(a) u, O(N^{2n}) symbol evaluations and no N^{2n} storage.
inline GridField apply_quantized(const Symbol& a, const GridField& u, bool right = false) {
  const GridSpec& s = u.spec;
  const size_t M = s.size();
  GridField out(s);
  if (!right) {
    SpectralField U = forward(u);
    const double scale = 1.0 / (s.cell() * M);
    for (size_t i = 0; i < M; ++i) {
      Vec3 x = s.point(i);
      cplx acc = 0;
      for (size_t k = 0; k < M; ++k) {
        Vec3 xi = s.freq(k);
        acc += std::polar(1.0, dot(x, xi, s.n)) * a(x, xi) * U.values[k];
      }
      out.values[i] = acc * scale;
    }
    return out;
  }
  SpectralField C{s, std::vector<cplx>(M)};
  for (size_t k = 0; k < M; ++k) {
    Vec3 xi = s.freq(k);
    cplx acc = 0;
    for (size_t j = 0; j < M; ++j) {
      Vec3 x = s.point(j);
      acc += std::polar(1.0, -dot(x, xi, s.n)) * a(x, xi) * u.values[j];
    }
    C.values[k] = acc * s.cell();
  }
  return inverse(C);
}

// Symbol values on the grid nodes (x_i, xi_k); lookups snap to the nearest node.
struct TabulatedSymbol {
  GridSpec spec;
  Eigen::MatrixXcd table;  // rows x_i, cols xi_k
  double edge_ratio = 0;   // kernel magnitude at the window edge relative to its maximum
  bool decayed = true;

  size_t x_index(const Vec3& x) const {
    size_t f = 0;
    for (int d = 0; d < spec.n; ++d) {
      long i = std::lround((x[d] + spec.L) / spec.h());
      i = ((i % spec.N) + spec.N) % spec.N;
      f = f * spec.N + i;
    }
    return f;
  }
  size_t xi_index(const Vec3& xi) const {
    size_t f = 0;
    for (int d = 0; d < spec.n; ++d) {
      long k = std::lround(xi[d] / spec.dxi()) + spec.N / 2;
      k = std::clamp<long>(k, 0, spec.N - 1);
      f = f * spec.N + k;
    }
    return f;
  }
  Symbol as_symbol(double m = 0, double l = 0) const {
    auto self = std::make_shared<TabulatedSymbol>(*this);
    return make_symbol(
        spec.n, [self](const Vec3& x, const Vec3& xi) { return self->table(self->x_index(x), self->xi_index(xi)); }, m, l);
  }
};

namespace detail {

// out_k = sum_d c_d e^{-i d.(h xi_k)} for centered offsets d in [-N/2, N/2)^n, centered k.
inline std::vector<cplx> offset_transform(const GridSpec& s, const std::vector<cplx>& c) {
  GridField g(s);
  // Place offset d at grid index d + N/2 so x = d h; then forward() gives h^n sum e^{-i d h xi} c.
  g.values = c;
  SpectralField F = forward(g);
  std::vector<cplx> out(s.size());
  for (size_t k = 0; k < s.size(); ++k) {
    // forward uses x_j = -L + j h = (j - N/2) h, exactly the offsets.
    out[k] = F.values[k] / s.cell();
  }
  return out;
}

}  // namespace detail

// Exact discrete inverse of quantize: a(x_i, xi_k) = sum_d M_{i, i-d} e^{-i d h xi_k}, d periodic.
inline TabulatedSymbol symbol_from_kernel(const DenseOperator& op) {
  const GridSpec& s = op.spec;
  const size_t M = s.size();
  TabulatedSymbol t{s, Eigen::MatrixXcd(M, M)};
  double kmax = op.matrix.cwiseAbs().maxCoeff(), edge = 0;
  std::vector<cplx> c(M);
  for (size_t i = 0; i < M; ++i) {
    auto xi_idx = s.index(i);
    for (size_t dflat = 0; dflat < M; ++dflat) {
      auto didx = s.index(dflat);  // d = didx - N/2
      size_t j = 0;
      bool at_edge = false;
      for (int ax = 0; ax < s.n; ++ax) {
        int d = didx[ax] - s.N / 2;
        if (didx[ax] == 0) at_edge = true;
        j = j * s.N + ((xi_idx[ax] - d) % s.N + s.N) % s.N;
      }
      c[dflat] = op.matrix(i, j);
      if (at_edge) edge = std::max(edge, std::abs(c[dflat]));
    }
    auto row = detail::offset_transform(s, c);
    for (size_t k = 0; k < M; ++k) t.table(i, k) = row[k];
  }
  t.edge_ratio = kmax > 0 ? edge / kmax : 0;
  t.decayed = t.edge_ratio < 1e-10;
  return t;
}

// a(x, xi) = int e^{-i w.xi} K(x, x - w) dw on the centered offset window.
inline TabulatedSymbol symbol_from_kernel(const std::function<cplx(const Vec3&, const Vec3&)>& K, const GridSpec& s) {
  const size_t M = s.size();
  TabulatedSymbol t{s, Eigen::MatrixXcd(M, M)};
  double kmax = 0, edge = 0;
  std::vector<cplx> c(M);
  for (size_t i = 0; i < M; ++i) {
    Vec3 x = s.point(i);
    for (size_t dflat = 0; dflat < M; ++dflat) {
      auto didx = s.index(dflat);
      Vec3 y = x;
      bool at_edge = false;
      for (int ax = 0; ax < s.n; ++ax) {
        y[ax] = x[ax] - (didx[ax] - s.N / 2) * s.h();
        if (didx[ax] == 0) at_edge = true;
      }
      c[dflat] = K(x, y) * s.cell();
      kmax = std::max(kmax, std::abs(c[dflat]));
      if (at_edge) edge = std::max(edge, std::abs(c[dflat]));
    }
    auto row = detail::offset_transform(s, c);
    for (size_t k = 0; k < M; ++k) t.table(i, k) = row[k];
  }
  t.edge_ratio = kmax > 0 ? edge / kmax : 0;
  t.decayed = t.edge_ratio < 1e-10;
  return t;
}

// ---- symbol estimates ----------------------------------------------------

struct SeminormEntry {
  MultiIndex alpha, beta;
  double value;
};

struct SeminormReport {
  int k = 0;
  double value = 0;
  std::vector<SeminormEntry> per_multiindex;
  // Sup over probes grouped by the |x| and |xi| scale (index into probe_scales()).
  std::vector<double> by_x_scale, by_xi_scale;
  bool in_class = true;
  double log_growth = 0;  // largest fitted slope of a per-multi-index, per-scale sup against log(scale)
};

inline const std::vector<double>& probe_scales() {
  static const std::vector<double> s{0, 1, 4, 16, 64, 256, 1024};
  return s;
}

inline std::vector<Vec3> probe_directions(int n) {
  if (n == 1) return {{1, 0, 0}, {-1, 0, 0}};
  const double r = 1 / std::sqrt(2.0);
  if (n == 2) return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {r, r, 0}, {-r, r, 0}};
  const double q = 1 / std::sqrt(3.0);
  return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {q, q, q}, {-q, q, -q}};
}

template <class F>
void for_each_probe(int n, F&& f) {
  const auto& sc = probe_scales();
  auto dirs = probe_directions(n);
  for (size_t ix = 0; ix < sc.size(); ++ix)
    for (size_t dx = 0; dx < (ix == 0 ? 1 : dirs.size()); ++dx)
      for (size_t ik = 0; ik < sc.size(); ++ik)
        for (size_t dk = 0; dk < (ik == 0 ? 1 : dirs.size()); ++dk) {
          Vec3 x{0, 0, 0}, xi{0, 0, 0};
          for (int d = 0; d < n; ++d) {
            x[d] = sc[ix] * dirs[dx][d];
            xi[d] = sc[ik] * dirs[dk][d];
          }
          f(x, xi, ix, ik);
        }
}

// sup <x>^{-l+|alpha|} <xi>^{-m+|beta|} |D_x^alpha D_xi^beta a| over the probe set.
inline SeminormReport conormal_seminorm(const Symbol& a, int k) {
  if (k < 0 || k > 4) throw std::invalid_argument("seminorm derivative budget must be 0..4");
  SeminormReport rep;
  rep.k = k;
  const auto& sc = probe_scales();
  rep.by_x_scale.assign(sc.size(), 0);
  rep.by_xi_scale.assign(sc.size(), 0);
  // Divergence across scales: the top-scale sup keeps growing over the last three scales.
  auto grows = [](const std::vector<double>& v) {
    size_t t = v.size() - 1;
    if (!std::isfinite(v[t])) return true;
    return v[t] > 1e-8 && v[t] > 1.15 * v[t - 2] && v[t] >= v[t - 1] && v[t - 1] >= v[t - 2];
  };
  std::vector<double> lx;
  for (size_t i = 3; i < sc.size(); ++i) lx.push_back(std::log(sc[i]));
  auto slope = [&](const std::vector<double>& v) {
    std::vector<double> ly(v.begin() + 3, v.end());
    return fit_line(lx, ly).slope;
  };
  for (int total = 0; total <= k; ++total)
    for (int ka = 0; ka <= total; ++ka)
      for (auto& al : multi_indices(a.n, ka, true))
        for (auto& be : multi_indices(a.n, total - ka, true)) {
          double sup = 0;
          std::vector<double> bx(sc.size(), 0), bk(sc.size(), 0);
          for_each_probe(a.n, [&](const Vec3& x, const Vec3& xi, size_t ix, size_t ik) {
            double w = std::pow(jp(x, a.n), -a.l + ka) * std::pow(jp(xi, a.n), -a.m + (total - ka));
            double v = w * std::abs(partial(a, x, xi, al, be));
            if (!std::isfinite(v)) v = INFINITY;
            sup = std::max(sup, v);
            bx[ix] = std::max(bx[ix], v);
            bk[ik] = std::max(bk[ik], v);
          });
          for (size_t i = 0; i < sc.size(); ++i) {
            rep.by_x_scale[i] = std::max(rep.by_x_scale[i], bx[i]);
            rep.by_xi_scale[i] = std::max(rep.by_xi_scale[i], bk[i]);
          }
          if (grows(bx) || grows(bk)) rep.in_class = false;
          if (std::isfinite(bx.back()) && std::isfinite(bk.back()))
            rep.log_growth = std::max({rep.log_growth, slope(bx), slope(bk)});
          else
            rep.log_growth = INFINITY;
          rep.per_multiindex.push_back({al, be, sup});
          rep.value = std::max(rep.value, sup);
        }
  return rep;
}

// ---- composition and brackets --------------------------------------------

// sum_{|alpha| < N_terms} (D_xi^alpha a)(d_x^alpha b) / alpha!
inline Symbol compose_expansion(const Symbol& a, const Symbol& b, int N_terms) {
  if (N_terms < 1 || N_terms > 4) throw std::invalid_argument("compose_expansion: N_terms must be 1..4");
  if (a.n != b.n) throw std::invalid_argument("compose_expansion: dimension mismatch");
  std::vector<MultiIndex> alphas = multi_indices(a.n, N_terms - 1);
  int n = a.n;
  Symbol out = make_symbol(
      n,
      [a, b, alphas](const Vec3& x, const Vec3& xi) {
        cplx acc = 0;
        const MultiIndex zero{0, 0, 0};
        for (auto& al : alphas) {
          int k = order_of(al);
          cplx da = k == 0 ? a(x, xi) : partial(a, x, xi, zero, al) * std::pow(-I, k);
          if (da == 0.0) continue;
          cplx db = k == 0 ? b(x, xi) : partial(b, x, xi, al, zero);
          acc += da * db / factorial(al);
        }
        return acc;
      },
      a.m + b.m, a.l + b.l);
  out.classical = a.classical && b.classical;
  return out;
}

// {a, b} = sum_j d_xi_j a d_x_j b - d_x_j a d_xi_j b
inline Symbol poisson_bracket(const Symbol& a, const Symbol& b) {
  if (a.n != b.n) throw std::invalid_argument("poisson_bracket: dimension mismatch");
  int n = a.n;
  return make_symbol(
      n,
      [a, b, n](const Vec3& x, const Vec3& xi) {
        cplx acc = 0;
        for (int j = 0; j < n; ++j) {
          MultiIndex e{0, 0, 0}, z{0, 0, 0};
          e[j] = 1;
          acc += partial(a, x, xi, z, e) * partial(b, x, xi, e, z) - partial(a, x, xi, e, z) * partial(b, x, xi, z, e);
        }
        return acc;
      },
      a.m + b.m - 1, a.l + b.l - 1);
}

// ---- operator norms ------------------------------------------------------

inline double spectral_norm(const Eigen::MatrixXcd& A) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
  return svd.singularValues()(0);
}

// Norm of A compressed to the frequencies |xi_j| <= fraction * pi / h in every axis.
// Growing symbols wrap around at the Nyquist edge of the periodic grid, so norms
// meant to reflect the continuum operator are taken on the resolved band.
inline double band_limited_norm(const Eigen::MatrixXcd& A, const GridSpec& g, double fraction = 0.5) {
  const double cut = fraction * pi / g.h();
  std::vector<size_t> band;
  for (size_t k = 0; k < g.size(); ++k) {
    Vec3 xi = g.freq(k);
    bool in = true;
    for (int j = 0; j < g.n; ++j) in = in && std::abs(xi[j]) <= cut + 1e-12;
    if (in) band.push_back(k);
  }
  Eigen::MatrixXcd Q(band.size(), g.size());
  const double norm = 1.0 / std::sqrt(static_cast<double>(g.size()));
  for (size_t r = 0; r < band.size(); ++r) {
    Vec3 xi = g.freq(band[r]);
    for (size_t i = 0; i < g.size(); ++i) Q(r, i) = norm * std::polar(1.0, -dot(g.point(i), xi, g.n));
  }
  return spectral_norm(Q * A * Q.adjoint());
}

// Matrix of <D>^s <x>^r on the grid (the H^{s,r} weight).
inline Eigen::MatrixXcd sobolev_weight_matrix(const GridSpec& g, double s, double r) {
  Symbol mult = make_symbol(g.n, [s, n = g.n](const Vec3&, const Vec3& xi) { return cplx(std::pow(jp(xi, n), s)); }, s, 0);
  Eigen::MatrixXcd W = quantize(mult, g).matrix;
  for (size_t j = 0; j < g.size(); ++j) W.col(j) *= std::pow(jp(g.point(j), g.n), r);
  return W;
}

// Largest singular value of W_to A W_from^{-1}.
inline double operator_norm_estimate(const DenseOperator& A, const SobolevOrder& from, const SobolevOrder& to) {
  if (from.is_variable() || to.is_variable()) throw std::invalid_argument("operator_norm_estimate needs constant orders");
  const GridSpec& g = A.spec;
  Eigen::MatrixXcd Wto = sobolev_weight_matrix(g, to.s, to.r);
  Eigen::MatrixXcd WfromInv = sobolev_weight_matrix(g, -from.s, 0);
  // (<D>^s <x>^r)^{-1} = <x>^{-r} <D>^{-s}
  for (size_t i = 0; i < g.size(); ++i) WfromInv.row(i) *= std::pow(jp(g.point(i), g.n), -from.r);
  return spectral_norm(Wto * A.matrix * WfromInv);
}

// ---- parametrix ----------------------------------------------------------

// inf over the probe set of |a| / (<xi>^m <x>^l)
inline double ellipticity_floor(const Symbol& a) {
  double inf = INFINITY;
  for_each_probe(a.n, [&](const Vec3& x, const Vec3& xi, size_t, size_t) {
    double w = std::pow(jp(xi, a.n), a.m) * std::pow(jp(x, a.n), a.l);
    inf = std::min(inf, std::abs(a(x, xi)) / w);
  });
  return inf;
}

struct ParametrixResult {
  Symbol b0;
  DenseOperator B;              // B_N at the requested N
  TabulatedSymbol symbol;       // symbol of B_N
  std::vector<double> residuals;  // ||Op(a) B_j - Id||, j = 0..N
};

// B_N = B0 (Id + R + ... + R^N), R = Id - Op(a) B0.
inline ParametrixResult parametrix(const Symbol& a, int N_terms, const GridSpec& g) {
  double inf = ellipticity_floor(a);
  if (!(inf > 1e-6))
    throw PreconditionError("symbol is not elliptic in the scattering sense: inf <xi>^-m <x>^-l |a| = " +
                            std::to_string(inf));
  if (N_terms < 0) throw std::invalid_argument("parametrix: N_terms must be >= 0");
  const double kappa = 0.5 * inf * inf;
  Symbol b0 = make_symbol(
      a.n,
      [a, inf, kappa](const Vec3& x, const Vec3& xi) {
        cplx v = a(x, xi);
        double w = std::pow(jp(xi, a.n), a.m) * std::pow(jp(x, a.n), a.l);
        double q = std::abs(v) / (w * inf);
        double low = 1 - smooth_step((q - 2) / 2);
        cplx inv = low < 1 ? 1.0 / v : 0.0;
        return (1 - low) * inv + low * std::conj(v) / (std::norm(v) + kappa * w * w);
      },
      -a.m, -a.l);
  ParametrixResult res;
  res.b0 = b0;
  DenseOperator A = quantize(a, g);
  DenseOperator B0 = quantize(b0, g);
  Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(g.size(), g.size());
  Eigen::MatrixXcd R = Id - A.matrix * B0.matrix;
  Eigen::MatrixXcd S = Id, P = Id;
  for (int j = 0; j <= N_terms; ++j) {
    if (j > 0) {
      P = P * R;
      S += P;
    }
    Eigen::MatrixXcd Bj = B0.matrix * S;
    res.residuals.push_back(spectral_norm(A.matrix * Bj - Id));
    if (j == N_terms) res.B = {g, Bj, -a.m, -a.l};
  }
  res.symbol = symbol_from_kernel(res.B);
  return res;
}

// ---- variable-order Sobolev norm -------------------------------------------

// ||u||^2 = ||A u||^2 + ||Lambda u||^2 with A = Op_R(<xi>^s <x>^{r(x,xi)}) and
// Lambda = <D>^s <x>^L, L = min r - 1. For a constant order A is injective and the
// floor is dropped, so the value coincides with sobolev_norm.
inline double var_sobolev_norm(const GridField& u, const SobolevOrder& ord) {
  if (!ord.is_variable()) return sobolev_norm(u, ord.s, ord.r);
  const GridSpec& g = u.spec;
  double rmin = INFINITY, rmax = -INFINITY;
  for (size_t i = 0; i < g.size(); ++i)
    for (size_t k = 0; k < g.size(); ++k) {
      double r = ord.variable_r(g.point(i), g.freq(k));
      if (!std::isfinite(r)) throw PreconditionError("variable order is unbounded on the grid");
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
  if (rmax - rmin < 1e-14) return sobolev_norm(u, ord.s, rmin);
  const int n = g.n;
  const double s = ord.s;
  auto rfun = ord.variable_r;
  Symbol A = make_symbol(
      n, [rfun, s, n](const Vec3& x, const Vec3& xi) { return cplx(std::pow(jp(xi, n), s) * std::pow(jp(x, n), rfun(x, xi))); },
      s, rmax);
  double main = apply_quantized(A, u, true).l2_norm();
  double floor = sobolev_norm(u, s, rmin - 1);
  return std::sqrt(main * main + floor * floor);
}

}  // namespace scatcalc

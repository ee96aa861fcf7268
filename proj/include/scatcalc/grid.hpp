#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <optional>

#include "common.hpp"

namespace scatcalc {

struct GridSpec {
  int n = 1;
  double L = 1;
  int N = 8;

  double h() const { return 2 * L / N; }
  double dxi() const { return pi / L; }
  size_t size() const {
    size_t s = 1;
    for (int d = 0; d < n; ++d) s *= N;
    return s;
  }
  double x(int i) const { return -L + i * h(); }
  double xi(int k) const { return (k - N / 2) * dxi(); }

  // Multi-index of flat position (last axis fastest).
  std::array<int, 3> index(size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = n - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % N);
      flat /= N;
    }
    return idx;
  }
  Vec3 point(size_t flat) const {
    auto idx = index(flat);
    Vec3 p{0, 0, 0};
    for (int d = 0; d < n; ++d) p[d] = x(idx[d]);
    return p;
  }
  Vec3 freq(size_t flat) const {
    auto idx = index(flat);
    Vec3 p{0, 0, 0};
    for (int d = 0; d < n; ++d) p[d] = xi(idx[d]);
    return p;
  }
  double cell() const { return std::pow(h(), n); }
  double freq_cell() const { return std::pow(dxi(), n); }
  bool operator==(const GridSpec& o) const { return n == o.n && L == o.L && N == o.N; }
};

inline GridSpec make_grid(int n, double L, int N) {
  if (n < 1 || n > 3) throw ConfigError("grid dimension must be 1, 2 or 3");
  if (!(L > 0) || !std::isfinite(L)) throw ConfigError("grid half_width must be positive");
  if (N < 8) throw ConfigError("grid points_per_axis must be >= 8");
  if (N % 2) throw ConfigError("grid points_per_axis must be even");
  double total = std::pow(static_cast<double>(N), n);
  if (total > double(1 << 24)) throw ConfigError("grid too large: N^n exceeds 2^24");
  return GridSpec{n, L, N};
}

struct GridField {
  GridSpec spec;
  std::vector<cplx> values;

  GridField() = default;
  explicit GridField(const GridSpec& s) : spec(s), values(s.size()) {}

  template <class F>
  static GridField sample(const GridSpec& s, F&& f) {
    GridField u(s);
    for (size_t i = 0; i < u.values.size(); ++i) u.values[i] = f(s.point(i));
    return u;
  }

  double l2_norm() const {
    double acc = 0;
    for (auto& v : values) acc += std::norm(v);
    return std::sqrt(acc * spec.cell());
  }
};

// Values in centered frequency order k = -N/2..N/2-1 along each axis.
struct SpectralField {
  GridSpec spec;
  std::vector<cplx> values;

  double l2_norm() const {
    double acc = 0;
    for (auto& v : values) acc += std::norm(v);
    return std::sqrt(acc * spec.freq_cell() / std::pow(2 * pi, spec.n));
  }
};

namespace detail {

// In-place FFT along one axis of a row-major N^n array.
inline void fft_axis(std::vector<cplx>& data, const GridSpec& s, int axis, bool inverse) {
  static thread_local Eigen::FFT<double> fft;
  const int N = s.N;
  size_t stride = 1;
  for (int d = s.n - 1; d > axis; --d) stride *= N;
  size_t outer = s.size() / (stride * N);
  std::vector<cplx> in(N), out(N);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t st = 0; st < stride; ++st) {
      size_t base = o * stride * N + st;
      for (int i = 0; i < N; ++i) in[i] = data[base + i * stride];
      if (inverse)
        fft.inv(out, in);
      else
        fft.fwd(out, in);
      for (int i = 0; i < N; ++i) data[base + i * stride] = out[i];
    }
  }
}

}  // namespace detail

enum class Direction { forward, inverse };

// u_hat(xi_k) = h^n sum_j e^{-i x_j.xi_k} u_j, the discrete form of the integral transform.
inline SpectralField forward(const GridField& u) {
  const GridSpec& s = u.spec;
  if (u.values.size() != s.size()) throw std::invalid_argument("field does not match its grid");
  std::vector<cplx> data = u.values;
  for (int d = 0; d < s.n; ++d) detail::fft_axis(data, s, d, false);
  // Reorder to centered frequencies; x_0 = -L contributes the phase (-1)^k per axis.
  SpectralField out{s, std::vector<cplx>(s.size())};
  const double cell = s.cell();
  for (size_t f = 0; f < s.size(); ++f) {
    auto idx = s.index(f);  // centered index c, k = c - N/2
    size_t src = 0;
    int parity = 0;
    for (int d = 0; d < s.n; ++d) {
      int k = idx[d] - s.N / 2;
      int raw = (k + s.N) % s.N;
      src = src * s.N + raw;
      parity += k;
    }
    out.values[f] = data[src] * cell * ((parity % 2) ? -1.0 : 1.0);
  }
  return out;
}

inline GridField inverse(const SpectralField& U) {
  const GridSpec& s = U.spec;
  if (U.values.size() != s.size()) throw std::invalid_argument("field does not match its grid");
  std::vector<cplx> data(s.size());
  const double cell = s.cell();
  for (size_t f = 0; f < s.size(); ++f) {
    auto idx = s.index(f);
    size_t dst = 0;
    int parity = 0;
    for (int d = 0; d < s.n; ++d) {
      int k = idx[d] - s.N / 2;
      dst = dst * s.N + (k + s.N) % s.N;
      parity += k;
    }
    data[dst] = U.values[f] * ((parity % 2) ? -1.0 : 1.0) / cell;
  }
  for (int d = 0; d < s.n; ++d) detail::fft_axis(data, s, d, true);
  GridField u(s);
  u.values = std::move(data);
  return u;
}

inline SpectralField spectral_transform(const GridField& u) { return forward(u); }
inline GridField spectral_transform(const SpectralField& U) { return inverse(U); }

// Applies a Fourier multiplier m(xi).
template <class M>
GridField apply_multiplier(const GridField& u, M&& m) {
  SpectralField U = forward(u);
  for (size_t f = 0; f < U.values.size(); ++f) U.values[f] *= m(u.spec.freq(f));
  return inverse(U);
}

struct SobolevOrder {
  double s = 0;
  double r = 0;
  // Variable spatial order r(x, xi); when absent the constant r is used.
  std::function<double(const Vec3&, const Vec3&)> variable_r;

  bool is_variable() const { return static_cast<bool>(variable_r); }
};

// || <D>^s (<x>^r u) ||_{L^2}
inline double sobolev_norm(const GridField& u, double s, double r) {
  const GridSpec& g = u.spec;
  GridField w(g);
  for (size_t i = 0; i < g.size(); ++i) w.values[i] = std::pow(jp(g.point(i), g.n), r) * u.values[i];
  if (s == 0) return w.l2_norm();
  SpectralField W = forward(w);
  double acc = 0;
  for (size_t f = 0; f < g.size(); ++f) acc += std::pow(1 + norm2(g.freq(f), g.n), s) * std::norm(W.values[f]);
  return std::sqrt(acc * g.freq_cell() / std::pow(2 * pi, g.n));
}

inline double sobolev_norm(const GridField& u, const SobolevOrder& ord) {
  if (ord.is_variable()) throw std::invalid_argument("sobolev_norm needs a constant order");
  return sobolev_norm(u, ord.s, ord.r);
}

}  // namespace scatcalc

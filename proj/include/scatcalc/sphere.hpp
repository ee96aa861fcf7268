#pragma once

#include "common.hpp"

namespace scatcalc {

// Nodes and weights on S^{n-1}: {+1,-1} for n = 1, trapezoid on S^1,
// Gauss-Legendre in cos(theta) times uniform azimuth on S^2.
struct SphereQuadrature {
  int n = 2;
  std::vector<Vec3> nodes;
  std::vector<double> weights;

  size_t size() const { return nodes.size(); }

  // m: nodes per great circle.
  static SphereQuadrature make(int n, int m) {
    SphereQuadrature q;
    q.n = n;
    if (n == 1) {
      q.nodes = {{1, 0, 0}, {-1, 0, 0}};
      q.weights = {1, 1};
      return q;
    }
    if (n == 2) {
      for (int k = 0; k < m; ++k) {
        double t = 2 * pi * k / m;
        q.nodes.push_back({std::cos(t), std::sin(t), 0});
        q.weights.push_back(2 * pi / m);
      }
      return q;
    }
    if (n != 3) throw std::invalid_argument("sphere quadrature: n must be 1, 2 or 3");
    int nz = std::max(2, m / 2 + 1);
    QuadRule gl = gauss_legendre(nz);
    for (int i = 0; i < nz; ++i) {
      double c = gl.nodes[i], s = std::sqrt(std::max(0.0, 1 - c * c));
      for (int k = 0; k < m; ++k) {
        double p = 2 * pi * (k + 0.5) / m;
        q.nodes.push_back({s * std::cos(p), s * std::sin(p), c});
        q.weights.push_back(gl.weights[i] * 2 * pi / m);
      }
    }
    return q;
  }

  template <class F>
  auto integrate(F&& f) const {
    decltype(f(nodes[0])) acc{};
    for (size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

inline double sphere_area(int n) {
  // |S^{n-1}|
  switch (n) {
    case 1: return 2;
    case 2: return 2 * pi;
    case 3: return 4 * pi;
    default: return 2 * std::pow(pi, n / 2.0) / std::tgamma(n / 2.0);
  }
}

}  // namespace scatcalc

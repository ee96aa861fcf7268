#pragma once

#include <algorithm>

#include "sphere.hpp"

namespace scatcalc {

struct MassOptions {
  int angular_nodes = 64;
  double panel = 2.0;
  double tol = 1e-8;
  int max_depth = 10;
};

struct MassTable {
  std::vector<double> orders, radii;
  std::vector<std::vector<double>> mass;  // mass[order][radius]
  bool converged = true;
  double worst_error = 0;
};

// int_{|x| <= R} <x>^{2r} |u|^2 dx for every (r, R) pair in one radial sweep.
// The angular average is computed once per radial node and reused for all orders.
inline MassTable truncated_weighted_mass(const std::function<cplx(const Vec3&)>& u, int n, std::vector<double> orders,
                                         std::vector<double> radii, const MassOptions& opt = {}) {
  if (radii.empty() || orders.empty()) throw std::invalid_argument("truncated_weighted_mass: empty orders or radii");
  std::vector<double> sorted = radii;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() <= 0) throw std::invalid_argument("truncated_weighted_mass: radii must be positive");
  SphereQuadrature sq = SphereQuadrature::make(n, opt.angular_nodes);
  const size_t no = orders.size();

  auto shell = [&](double rho) {
    double acc = 0;
    for (size_t i = 0; i < sq.size(); ++i) {
      Vec3 p{rho * sq.nodes[i][0], rho * sq.nodes[i][1], rho * sq.nodes[i][2]};
      acc += sq.weights[i] * std::norm(u(p));
    }
    return acc * std::pow(rho, n - 1);
  };
  const QuadRule lo = gauss_legendre(8), hi = gauss_legendre(12);
  auto panel_sum = [&](const QuadRule& q, double a, double b) {
    std::vector<double> s(no, 0.0);
    for (size_t i = 0; i < q.nodes.size(); ++i) {
      double rho = 0.5 * (a + b) + 0.5 * (b - a) * q.nodes[i];
      double w = 0.5 * (b - a) * q.weights[i], v = shell(rho);
      for (size_t k = 0; k < no; ++k) s[k] += w * std::pow(1 + rho * rho, orders[k]) * v;
    }
    return s;
  };

  MassTable tab;
  tab.orders = orders;
  tab.radii = radii;
  tab.mass.assign(no, std::vector<double>(radii.size(), 0.0));
  std::vector<double> total(no, 0.0);

  std::function<void(double, double, int)> integrate = [&](double a, double b, int depth) {
    auto s1 = panel_sum(lo, a, b), s2 = panel_sum(hi, a, b);
    double err = 0;
    bool ok = true;
    for (size_t k = 0; k < no; ++k) {
      double e = std::abs(s2[k] - s1[k]);
      double scale = std::max(std::abs(total[k]) + std::abs(s2[k]), 1e-300);
      if (e > opt.tol * scale) ok = false;
      err = std::max(err, e / scale);
    }
    if (!ok && depth < opt.max_depth) {
      double mid = 0.5 * (a + b);
      integrate(a, mid, depth + 1);
      integrate(mid, b, depth + 1);
      return;
    }
    if (!ok) tab.converged = false;
    tab.worst_error = std::max(tab.worst_error, err);
    for (size_t k = 0; k < no; ++k) total[k] += s2[k];
  };

  double prev = 0;
  for (double R : sorted) {
    int panels = std::max(1, static_cast<int>(std::ceil((R - prev) / opt.panel)));
    double w = (R - prev) / panels;
    for (int p = 0; p < panels; ++p) integrate(prev + p * w, prev + (p + 1) * w, 0);
    prev = R;
    for (size_t j = 0; j < radii.size(); ++j)
      if (radii[j] == R)
        for (size_t k = 0; k < no; ++k) tab.mass[k][j] = total[k];
  }
  return tab;
}

inline double truncated_weighted_mass(const std::function<cplx(const Vec3&)>& u, int n, double r, double R,
                                      const MassOptions& opt = {}) {
  if (R < 1) throw std::invalid_argument("truncated_weighted_mass: R must be >= 1");
  MassTable t = truncated_weighted_mass(u, n, std::vector<double>{r}, std::vector<double>{R}, opt);
  if (!t.converged) throw NumericalError("truncated_weighted_mass: radial quadrature did not converge");
  return t.mass[0][0];
}

}  // namespace scatcalc

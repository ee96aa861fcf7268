#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "scatcalc/helmholtz.hpp"

using namespace scatcalc;

namespace {

// Chebyshev points on [-1, 1] and the first-derivative matrix.
Eigen::MatrixXd cheb_matrix(int N, Eigen::VectorXd& x) {
  x.resize(N + 1);
  for (int i = 0; i <= N; ++i) x[i] = std::cos(pi * i / N);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N + 1, N + 1);
  auto c = [&](int i) { return (i == 0 || i == N ? 2.0 : 1.0) * (i % 2 ? -1.0 : 1.0); };
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      if (i != j) D(i, j) = c(i) / c(j) / (x[i] - x[j]);
  for (int i = 0; i <= N; ++i) {
    double s = 0;
    for (int j = 0; j <= N; ++j)
      if (j != i) s += D(i, j);
    D(i, i) = -s;
  }
  return D;
}

// max |(Delta - lambda^2) u| / max |u| on a 16^n Chebyshev patch centred at c.
double patch_residual(const SphereDensity& f, double lambda, const Vec3& c) {
  const int N = 15, n = f.n;
  Eigen::VectorXd x;
  Eigen::MatrixXd D = cheb_matrix(N, x);
  Eigen::MatrixXd D2 = D * D;
  const int m = N + 1;
  const int total = n == 2 ? m * m : m * m * m;
  Eigen::VectorXcd u(total);
  auto idx = [&](int i, int j, int k) { return (n == 2 ? 0 : k * m * m) + j * m + i; };
  for (int k = 0; k < (n == 2 ? 1 : m); ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) u[idx(i, j, k)] = eigenfunction(f, lambda, Vec3{c[0] + x[i], c[1] + x[j], n == 3 ? c[2] + x[k] : 0});
  Eigen::VectorXcd lap = Eigen::VectorXcd::Zero(total);
  for (int k = 0; k < (n == 2 ? 1 : m); ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l) {
          lap[idx(i, j, k)] += D2(i, l) * u[idx(l, j, k)] + D2(j, l) * u[idx(i, l, k)];
          if (n == 3) lap[idx(i, j, k)] += D2(k, l) * u[idx(i, j, l)];
        }
  Eigen::VectorXcd res = -lap - lambda * lambda * u;
  return res.cwiseAbs().maxCoeff() / (lambda * lambda * u.cwiseAbs().maxCoeff());
}

SphereDensity smooth_density(int n) {
  return {n, [](const Vec3& w) { return std::exp(0.5 * w[0] - 0.3 * w[1] + 0.2 * w[2]) * cplx(1, 0.25 * w[1]); }};
}

Vec3 unit(int n, double a, double b = 0) {
  if (n == 2) return {std::cos(a), std::sin(a), 0};
  return {std::cos(a) * std::cos(b), std::sin(a) * std::cos(b), std::sin(b)};
}

HarmonicDensity random_harmonic(int n, int L, std::mt19937& rng) {
  std::normal_distribution<double> g;
  HarmonicDensity h{n, L, {}};
  h.coeffs.resize(h.size());
  for (auto& c : h.coeffs) c = cplx(g(rng), g(rng));
  return h;
}

}  // namespace

TEST(SphereDensity, QuadratureIntegratesHarmonicsExactly) {
  for (int n : {2, 3}) {
    HarmonicDensity h{n, 6, {}};
    auto q = SphereQuadrature::make(n, 16);
    for (size_t a = 0; a < h.size(); ++a)
      for (size_t b = 0; b < h.size(); ++b) {
        auto [la, ma] = h.lm(a);
        auto [lb, mb] = h.lm(b);
        cplx s = q.integrate([&](const Vec3& w) {
          return HarmonicDensity::basis(n, la, ma, w) * std::conj(HarmonicDensity::basis(n, lb, mb, w));
        });
        EXPECT_NEAR(std::abs(s - (a == b ? 1.0 : 0.0)), 0, 1e-12) << n << " " << a << " " << b;
      }
  }
}

TEST(SphereDensity, ProjectionRoundTrip) {
  std::mt19937 rng(7);
  for (int n : {2, 3}) {
    auto h = random_harmonic(n, 5, rng);
    auto back = HarmonicDensity::project(h.as_density(), 5);
    for (size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(std::abs(back.coeffs[k] - h.coeffs[k]), 0, 1e-12);
  }
}

TEST(Eigenfunction, ConstantDensityClosedForms) {
  const double lambda = 1.3;
  auto one3 = SphereDensity::constant(3, 1.0);
  auto one2 = SphereDensity::constant(2, 1.0);
  for (double r : {0.5, 3.0, 17.0, 60.0}) {
    Vec3 x{r * 0.6, r * 0.0, r * 0.8};
    cplx u = eigenfunction(one3, lambda, x);
    double sinc = std::sin(lambda * r) / (lambda * r);
    EXPECT_NEAR(std::abs(u - std::pow(2 * pi, -3) * lambda * lambda * 4 * pi * sinc), 0, 1e-14);
    Vec3 y{r * 0.6, r * 0.8, 0};
    cplx v = eigenfunction(one2, lambda, y);
    EXPECT_NEAR(std::abs(v - std::pow(2 * pi, -2) * lambda * 2 * pi * std::cyl_bessel_j(0.0, lambda * r)), 0, 1e-13);
  }
}

TEST(Eigenfunction, ValueAtOrigin) {
  for (int n : {2, 3}) {
    auto f = smooth_density(n);
    const double lambda = 2.0;
    cplx mean = f.quadrature().integrate([&](const Vec3& w) { return f(w); });
    cplx u = eigenfunction(f, lambda, Vec3{0, 0, 0});
    EXPECT_NEAR(std::abs(u - std::pow(2 * pi, -n) * std::pow(lambda, n - 1) * mean), 0, 1e-14);
  }
}

TEST(Eigenfunction, PatchResidual) {
  EXPECT_LT(patch_residual(smooth_density(2), 1.0, Vec3{3.0, -2.0, 0}), 1e-8);
  EXPECT_LT(patch_residual(smooth_density(2), 2.5, Vec3{0.0, 1.0, 0}), 1e-8);
  EXPECT_LT(patch_residual(smooth_density(3), 1.0, Vec3{1.0, 0.5, -2.0}), 1e-8);
}

TEST(Eigenfunction, UnderResolvedFlagged) {
  auto f = smooth_density(2);
  EigenfunctionOptions opt;
  opt.max_nodes = 64;
  EXPECT_THROW(eigenfunction(f, 1.0, Vec3{100, 0, 0}, opt), NumericalError);
}

TEST(StationaryPhase, ErrorSlopeTwoAndThreeDimensions) {
  std::vector<double> radii{20, 32, 50, 80, 125, 200};
  for (int n : {2, 3}) {
    auto e = stationary_phase_errors(smooth_density(n), 1.0, unit(n, 0.3, 0.2), radii);
    EXPECT_NEAR(e.fit.slope, -(n + 1) / 2.0, 0.2) << "n=" << n;
  }
}

TEST(StationaryPhase, NoStationaryPointFastDecay) {
  // caps around e2 and -e2 cannot contain +-e1
  auto cap = cap_density(2, Vec3{0, 1, 0}, 0.6);
  auto both = SphereDensity{2, [cap](const Vec3& w) { return cap(w) + cap(Vec3{-w[0], -w[1], 0}); }, cap.degree};
  Eigenfunction E(both, 1.0);
  std::vector<double> radii{25, 50, 100, 200}, amp;
  for (double R : radii) {
    Vec3 x{R, 0, 0};
    EXPECT_EQ(stationary_phase_leading(both, 1.0, x), cplx(0));
    double e = 0;
    for (int k = 0; k < 16; ++k) e = std::max(e, std::abs(E(Vec3{R + pi * k / 16, 0, 0})));
    amp.push_back(e);
  }
  // much faster than the generic |x|^{-1/2}
  EXPECT_LT(fit_loglog(radii, amp).slope, -2.5);
}

TEST(StationaryPhase, OnlyIncomingSurvives) {
  auto f = cap_density(2, Vec3{-1, 0, 0}, 0.8);
  Eigenfunction u(f, 1.0);
  auto [fp, fm] = fit_profile(u, 2, 1.0, 200, Vec3{1, 0, 0});
  const double C = stationary_phase_constant(2, 1.0);
  EXPECT_LT(std::abs(fp) / C, 1e-2);
  EXPECT_NEAR(std::abs(fm - C * std::exp(I * (pi / 4))), 0, 1e-2 * C);
  EXPECT_THROW(stationary_phase_leading(f, 1.0, Vec3{2, 0, 0}), std::invalid_argument);
}

TEST(StationaryPhase, AnalyticProfileMatchesFit) {
  for (int n : {2, 3}) {
    auto f = smooth_density(n);
    auto prof = asymptotic_profile(f, 1.0);
    Eigenfunction u(f, 1.0);
    Vec3 w = unit(n, 0.7, -0.4);
    auto [fp, fm] = fit_profile(u, n, 1.0, 200, w);
    double scale = std::abs(prof.f_plus(w)) + std::abs(prof.f_minus(w));
    EXPECT_LT(std::abs(fp - prof.f_plus(w)) / scale, 2e-2);
    EXPECT_LT(std::abs(fm - prof.f_minus(w)) / scale, 2e-2);
  }
}

TEST(Threshold, Trichotomy) {
  auto f = SphereDensity::constant(2, 1.0);
  auto rows = threshold_scan(f, 1.0, {0.0, -0.5, -0.75}, {25, 50, 100, 200, 400});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].regime, ThresholdRegime::above);
  EXPECT_NEAR(rows[0].exponent, 1.0, 0.05);
  EXPECT_EQ(rows[1].regime, ThresholdRegime::at);
  EXPECT_GT(rows[1].log_fit_r2, 0.99);
  EXPECT_EQ(rows[2].regime, ThresholdRegime::below);
  EXPECT_LT(rows[2].mass[4] / rows[2].mass[2], 1.05);
  EXPECT_THROW(threshold_scan(f, 1.0, {0.0}, {25, 50, 100}), ConfigError);
}

TEST(FormalSeries, FirstStepsMatchClosedForms) {
  const double lambda = 1.5;
  HarmonicDensity a3{3, 2, {}};
  a3.coeffs.assign(a3.size(), 0);
  a3.coeffs[0] = 2.0;
  auto b3 = poisson_series_step(a3, 0, lambda, 3);
  for (auto c : b3.coeffs) EXPECT_EQ(c, cplx(0));  // e^{-i lambda r}/r is exact in 3D

  HarmonicDensity a2{2, 2, {}};
  a2.coeffs.assign(a2.size(), 0);
  a2.coeffs[2] = 1.0;  // m = 0
  auto b2 = poisson_series_step(a2, 0, lambda, 2);
  // Hankel H0^(2) expansion: 1 + i/(8z)
  EXPECT_NEAR(std::abs(b2.coeffs[2] - I / (8 * lambda)), 0, 1e-15);
  auto c2 = poisson_series_step(a2, 0, lambda, 2, +1);
  EXPECT_NEAR(std::abs(c2.coeffs[2] + I / (8 * lambda)), 0, 1e-15);

  // angular mode l = 1 on S^2: a_1 = l(l+1) a_0 / (2 i lambda)
  HarmonicDensity d3{3, 2, {}};
  d3.coeffs.assign(d3.size(), 0);
  d3.coeffs[2] = 1.0;
  auto e3 = poisson_series_step(d3, 0, lambda, 3);
  EXPECT_NEAR(std::abs(e3.coeffs[2] - 2.0 / (2.0 * I * lambda)), 0, 1e-15);
}

TEST(FormalSeries, WrongPowerRejected) {
  HarmonicDensity a{2, 1, {0, 1, 0}};
  EXPECT_THROW(poisson_series_step(a, 0, 1.0, 2, -1, 0.5 + 0.3), PreconditionError);
  EXPECT_NO_THROW(poisson_series_step(a, 0, 1.0, 2, -1, 0.5));
  cplx ob = formal_obstruction(0.5 + 0.3, 2, 1.0);
  EXPECT_NEAR(std::abs(ob), 0.6, 1e-15);
  EXPECT_NEAR(ob.imag(), -0.6, 1e-15);
  EXPECT_EQ(formal_obstruction(1.0, 3, 2.0), cplx(0));
}

TEST(FormalSeries, ResidualDecayImprovesPerTerm) {
  for (int n : {2, 3}) {
    // degree 4 so the three-dimensional series does not terminate before J = 2
    HarmonicDensity a0{n, 4, {}};
    a0.coeffs.assign(a0.size(), 0);
    for (size_t k = 0; k < a0.size(); ++k) a0.coeffs[k] = cplx(1.0 / (1 + k), 0.3);
    std::vector<double> radii{10, 14, 20, 28, 40};
    std::vector<double> slopes;
    for (int J = 0; J <= 2; ++J) {
      auto s = build_formal_series(a0, 1.0, J);
      std::vector<double> res;
      for (double R : radii) {
        Vec3 x = unit(n, 0.4, 0.3);
        for (auto& c : x) c *= R;
        res.push_back(std::abs(helmholtz_residual_fd(s, n, 1.0, x)));
      }
      slopes.push_back(fit_loglog(radii, res).slope);
    }
    EXPECT_NEAR(slopes[0], -(n - 1) / 2.0 - 2, 0.1) << n;
    EXPECT_GE(slopes[0] - slopes[1], 0.9) << n;
    EXPECT_GE(slopes[1] - slopes[2], 0.9) << n;
  }
}

TEST(BoundaryPairing, FreeEigenfunctionsGiveZero) {
  PairingSolution u{smooth_density(2), std::nullopt};
  auto p = boundary_pairing_check(u, u, 1.0, 100);
  const double scale = 2 * std::pow(sphere_l2_norm(asymptotic_profile(u.f, 1.0).f_plus), 2);
  EXPECT_LT(std::abs(p.rhs) / scale, 1e-12);
  EXPECT_LT(std::abs(p.lhs) / scale, 1e-8);
}

TEST(BoundaryPairing, DisjointCapsGiveZero) {
  PairingSolution u1{cap_density(2, Vec3{1, 0, 0}, 0.5), std::nullopt};
  PairingSolution u2{cap_density(2, Vec3{0, 1, 0}, 0.5), std::nullopt};
  auto p = boundary_pairing_check(u1, u2, 1.0, 100);
  EXPECT_LT(std::abs(p.rhs), 1e-15);
  EXPECT_LT(std::abs(p.lhs), 1e-6 * std::pow(stationary_phase_constant(2, 1.0), 2));
}

TEST(BoundaryPairing, GapDecreasesAndSmallAtLargeRadius) {
  HarmonicDensity g{2, 2, {0.1, cplx(0, 0.05), 0.3, 0.0, cplx(0.02, 0.02)}};
  PairingSolution u{smooth_density(2), build_formal_series(g, 1.0, 2, +1)};
  std::vector<double> gaps;
  for (double R : {100.0, 200.0, 400.0}) {
    auto p = boundary_pairing_check(u, u, 1.0, R);
    // with u1 = u2 the right side is purely imaginary
    EXPECT_LT(std::abs(p.rhs.real()), 1e-12 * std::abs(p.rhs));
    gaps.push_back(p.relative_gap);
  }
  EXPECT_GT(gaps[0], gaps[1]);
  EXPECT_GT(gaps[1], gaps[2]);
  EXPECT_LT(gaps[2], 0.1);
}

TEST(ScatteringMatrix, UnitaryAndEquivariant) {
  std::mt19937 rng(11);
  for (int n : {2, 3}) {
    for (int k = 0; k < 10; ++k) {
      auto fm = random_harmonic(n, 4, rng).as_density();
      auto fp = free_scattering_matrix(1.0, fm);
      EXPECT_NEAR(sphere_l2_norm(fp), sphere_l2_norm(fm), 1e-6);
    }
  }
  // rotation about the third axis
  const double a = 0.37;
  auto rot = [a](const Vec3& w, double s) {
    return Vec3{std::cos(s * a) * w[0] - std::sin(s * a) * w[1], std::sin(s * a) * w[0] + std::cos(s * a) * w[1], w[2]};
  };
  for (int n : {2, 3}) {
    auto f = random_harmonic(n, 3, rng).as_density();
    SphereDensity rf{n, [&](const Vec3& w) { return f(rot(w, -1)); }};
    auto s_rf = free_scattering_matrix(1.0, rf);
    auto sf = free_scattering_matrix(1.0, f);
    for (int k = 0; k < 20; ++k) {
      Vec3 w = unit(n, 0.31 * k, n == 3 ? 0.05 * k - 0.5 : 0);
      EXPECT_NEAR(std::abs(s_rf(w) - sf(rot(w, -1))), 0, 1e-8);
    }
  }
}

TEST(ScatteringMatrix, PhaseMatchesFixtureAndFit) {
  std::ifstream in(std::string(SCATCALC_FIXTURE_DIR) + "/free_smatrix.json");
  ASSERT_TRUE(in.good());
  auto j = nlohmann::json::parse(in);
  for (int n : {2, 3}) {
    auto ph = j["phase"][std::to_string(n)];
    cplx fixture(ph[0].get<double>(), ph[1].get<double>());
    EXPECT_NEAR(std::abs(free_smatrix_phase(n) - fixture), 0, 1e-12);
    // l-independence: each harmonic density reproduces the same constant from oscillation fits
    int lmax = n == 2 ? 3 : 2;
    HarmonicDensity h{n, lmax, {}};
    for (size_t k = 0; k < h.size(); ++k) {
      HarmonicDensity e = h;
      e.coeffs.assign(h.size(), 0);
      e.coeffs[k] = 1;
      auto f = e.as_density();
      Eigenfunction u(f, 1.0);
      Vec3 w = unit(n, 0.45, 0.35), mw{-w[0], -w[1], -w[2]};
      if (std::abs(f(w)) < 0.05) continue;
      auto [fp, fm_unused] = fit_profile(u, n, 1.0, 200, w);
      auto [fp2, fm] = fit_profile(u, n, 1.0, 200, mw);
      (void)fm_unused;
      (void)fp2;
      EXPECT_NEAR(std::abs(fp / fm - fixture), 0, 2e-2) << "n=" << n << " k=" << k;
    }
  }
}

TEST(ScatteringMatrix, ModeProjectionStableUnderRefinement) {
  for (int n : {2, 3})
    for (int l = 0; l <= 3; ++l) {
      int m = n == 2 ? -l : l / 2;
      auto coarse = smatrix_phase_from_mode(n, l, m, 1.0, 10, 48);
      auto fine = smatrix_phase_from_mode(n, l, m, 1.0, 10, 96);
      EXPECT_LT(std::abs(coarse.phase - fine.phase), 1e-10);
      EXPECT_LT(std::abs(fine.phase - free_smatrix_phase(n)), 1e-10);
      // a standing wave: equal outgoing and incoming Hankel weights
      EXPECT_LT(std::abs(fine.alpha / fine.beta - 1.0), 1e-10);
    }
}

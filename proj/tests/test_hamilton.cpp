#include <gtest/gtest.h>

#include <random>

#include "scatcalc/hamilton.hpp"

using namespace scatcalc;

namespace {

Vec3 random_unit(std::mt19937& rng, int n) {
  std::normal_distribution<double> g;
  Vec3 v{0, 0, 0};
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  double r = std::sqrt(norm2(v, n));
  for (int i = 0; i < n; ++i) v[i] /= r;
  return v;
}

double max_abs(const std::array<double, 6>& v, size_t m) {
  double r = 0;
  for (size_t i = 0; i < m; ++i) r = std::max(r, std::abs(v[i]));
  return r;
}

}  // namespace

TEST(HamiltonField, Examples) {
  auto H = models::helmholtz(2, 1.5);
  auto [xd, kd] = hamilton_field(H, {0.3, -2, 0}, {0.7, 0.2, 0});
  EXPECT_DOUBLE_EQ(xd[0], 1.4);
  EXPECT_DOUBLE_EQ(xd[1], 0.4);
  EXPECT_EQ(kd[0], 0);

  auto D = models::d_x1(2);
  std::tie(xd, kd) = hamilton_field(D, {1, 2, 0}, {3, 4, 0});
  EXPECT_EQ(xd[0], 1);
  EXPECT_EQ(xd[1], 0);

  auto X = models::xDx();
  std::tie(xd, kd) = hamilton_field(X, {2.5, 0, 0}, {-0.4, 0, 0});
  EXPECT_DOUBLE_EQ(xd[0], 2.5);
  EXPECT_DOUBLE_EQ(kd[0], 0.4);

  // finite-difference path agrees with the analytic gradient
  auto G = models::generic(X.p);
  auto [gx, gk] = hamilton_field(G, {2.5, 0, 0}, {-0.4, 0, 0});
  EXPECT_NEAR(gx[0], 2.5, 1e-7);
  EXPECT_NEAR(gk[0], 0.4, 1e-7);
}

TEST(Charts, TransitionsAreInverse) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 x{u(rng), u(rng), u(rng)}, xi{u(rng), u(rng), u(rng)};
    for (int n = 2; n <= 3; ++n) {
      for (ChartKind k : {ChartKind::interior, ChartKind::spatial, ChartKind::fibre, ChartKind::kg, ChartKind::parabolic}) {
        int axis = (k == ChartKind::parabolic) ? 1 : trial % n;
        auto p = to_chart(k, n, axis, x, xi);
        auto [x2, xi2] = from_chart(p);
        for (int i = 0; i < n; ++i) {
          EXPECT_NEAR(x2[i], x[i], 1e-10 * (1 + std::abs(x[i])));
          EXPECT_NEAR(xi2[i], xi[i], 1e-10 * (1 + std::abs(xi[i])));
        }
      }
      // spatial overlap: chart j -> chart k -> chart j
      auto a = to_chart(ChartKind::spatial, n, 0, x, xi);
      auto b = switch_axis(a, 1);
      auto a2 = switch_axis(b, 0);
      for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a2.c[i], a.c[i], 1e-10 * (1 + std::abs(a.c[i])));
      auto [xb, xib] = from_chart(b);
      for (int i = 0; i < n; ++i) EXPECT_NEAR(xb[i], x[i], 1e-10 * (1 + std::abs(x[i])));
    }
  }
}

TEST(BoundaryField, HelmholtzVanishesAtOutgoingSet) {
  auto H = models::helmholtz(3, 1.0);
  Vec3 xhat{1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 1 / std::sqrt(3.0)};
  auto p = boundary_point(3, xhat, xhat);
  auto f = boundary_chart_field(H, p);
  EXPECT_TRUE(f.closed_form);
  EXPECT_LT(max_abs(f.v, p.size()), 1e-15);
}

TEST(BoundaryField, ClosedFormsMatchGenericLimit) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::vector<std::pair<SymbolHamiltonian, std::vector<ChartKind>>> cases = {
      {models::helmholtz(2, 1.3), {ChartKind::spatial}},
      {models::helmholtz(3, 0.7), {ChartKind::spatial}},
      {models::d_x1(2), {ChartKind::spatial}},
      {models::xDx(), {ChartKind::spatial, ChartKind::fibre}},
      {models::klein_gordon(2), {ChartKind::kg}},
      {models::klein_gordon(3, 1.5), {ChartKind::kg}},
      {models::schrodinger(2), {ChartKind::spatial, ChartKind::parabolic}},
      {models::schrodinger(3), {ChartKind::spatial, ChartKind::parabolic}},
  };
  for (auto& [H, kinds] : cases) {
    const int n = H.n();
    for (ChartKind k : kinds) {
      for (int trial = 0; trial < 6; ++trial) {
        PhasePointChart p;
        p.kind = k;
        p.n = n;
        p.axis = (k == ChartKind::parabolic) ? 1 + trial % (n - 1) : (H.model == Model::schrodinger ? 0 : trial % n);
        p.sign = trial % 2 ? -1 : 1;
        p.fsign = trial % 3 ? 1 : -1;
        for (size_t i = 1; i < p.size(); ++i) p.c[i] = u(rng);
        if (k == ChartKind::kg) p.c[n] = 0.5 + std::abs(u(rng));
        if (k == ChartKind::parabolic) p.c[n] = 0.3 + std::abs(u(rng));
        p.c[0] = 0;
        auto closed = boundary_chart_field(H, p);
        auto gen = boundary_chart_field(H, p, true);
        ASSERT_TRUE(closed.closed_form) << model_name(H.model) << " " << p.id();
        EXPECT_TRUE(closed.tangent);
        EXPECT_TRUE(gen.tangent) << model_name(H.model) << " " << p.id();
        for (size_t i = 0; i < p.size(); ++i)
          EXPECT_NEAR(closed.v[i], gen.v[i], 1e-6) << model_name(H.model) << " " << p.id() << " i=" << i;
        EXPECT_NEAR(chart_symbol(H, p), chart_symbol(H, p, true), 1e-6) << model_name(H.model) << " " << p.id();
        // away from the boundary the closed form is the exact rescaled field
        p.c[0] = 0.2;
        closed = boundary_chart_field(H, p);
        gen = boundary_chart_field(H, p, true);
        for (size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(closed.v[i], gen.v[i], 1e-9) << model_name(H.model) << " " << p.id();
      }
    }
  }
}

TEST(BoundaryField, KleinGordonSinkAndSchrodingerZero) {
  auto K = models::klein_gordon(3);
  PhasePointChart p;
  p.kind = ChartKind::kg;
  p.n = 3;
  p.c = {0, 0, 0, 1.4, 0.3, -0.5};
  EXPECT_LT(max_abs(boundary_chart_field(K, p).v, 6), 1e-15);
  auto J = chart_jacobian(K, p);
  EXPECT_NEAR(J(0, 0), -2.8, 1e-8);
  EXPECT_NEAR(J(1, 1), -2.8, 1e-8);
  EXPECT_NEAR(J(2, 2), -2.8, 1e-8);

  // Schrodinger: timelike chart zero where 2 xi = y
  auto S = models::schrodinger(2);
  PhasePointChart q;
  q.kind = ChartKind::spatial;
  q.n = 2;
  q.c = {0, 0.6, -0.09, 0.3};
  EXPECT_LT(max_abs(boundary_chart_field(S, q).v, 4), 1e-15);
  // parabolic chart zero at rho_f = 2 q s, omega = v
  PhasePointChart r;
  r.kind = ChartKind::parabolic;
  r.n = 3;
  r.axis = 1;
  r.c = {0, 0.25, 0.1, 0.5, -1.01, 0.1};
  EXPECT_LT(max_abs(boundary_chart_field(models::schrodinger(3), r).v, 6), 1e-15);
}

TEST(BoundaryField, NonTangentFlagged) {
  // p = <x>^2 xi_1 (order (1, 2)) rescaled with l = 0 is not a b-field: flagged
  Symbol p = make_symbol(2, [](const Vec3& x, const Vec3& k) { return cplx((1 + x[0] * x[0] + x[1] * x[1]) * k[0]); }, 1, 0);
  auto H = models::generic(p);
  PhasePointChart pt;
  pt.kind = ChartKind::spatial;
  pt.n = 2;
  pt.c = {0, 0.2, 1, 0};
  EXPECT_FALSE(boundary_chart_field(H, pt).tangent);
  // with the correct order it is tangent
  H.p.l = 2;
  EXPECT_TRUE(boundary_chart_field(H, pt).tangent);
}

TEST(Trajectory, InteriorStraightLine) {
  auto H = models::helmholtz(2, 1.0);
  Vec3 x0{0.5, -1, 0}, k0{0.6, 0.8, 0};
  auto start = to_chart(ChartKind::interior, 2, 0, x0, k0);
  auto path = flow_trajectory(H, start, 3.0, 0.01);
  ASSERT_EQ(path.size(), 301u);
  auto& e = path.back();
  EXPECT_NEAR(e.c[0], x0[0] + 2 * k0[0] * 3, 1e-8);
  EXPECT_NEAR(e.c[1], x0[1] + 2 * k0[1] * 3, 1e-8);
  EXPECT_NEAR(e.c[2], k0[0], 1e-12);
  EXPECT_THROW(flow_trajectory(H, start, 1.0, 0.02), std::invalid_argument);
}

TEST(Trajectory, HelmholtzBoundaryConvergesToOutgoing) {
  const double lambda = 1.0;
  std::mt19937 rng(11);
  for (int n : {2, 3}) {
    auto H = models::helmholtz(n, lambda);
    int reached = 0, monotone = 0;
    for (int trial = 0; trial < 25; ++trial) {
      Vec3 xhat = random_unit(rng, n), xi = random_unit(rng, n);
      for (int i = 0; i < n; ++i) xi[i] *= lambda;
      auto start = boundary_point(n, xhat, xi);
      ASSERT_LT(std::abs(chart_symbol(H, start)), 1e-8);
      auto fwd = flow_trajectory(H, start, 20, 0.01);
      auto back = flow_trajectory(H, start, -20, 0.01);
      double pmax = 0;
      bool mono = true;
      for (size_t k = 0; k < fwd.size(); ++k) {
        EXPECT_EQ(fwd[k].c[0], 0.0);
        pmax = std::max(pmax, std::abs(chart_symbol(H, fwd[k])));
        if (k > 200 && distance_to_outgoing(fwd[k]) > distance_to_outgoing(fwd[k - 1]) + 1e-12) mono = false;
      }
      EXPECT_LT(pmax, 1e-6);
      if (distance_to_outgoing(fwd.back()) < 1e-3) ++reached;
      if (mono) ++monotone;
      // backward: incoming set xhat = -xi/|xi|
      auto d = helmholtz_boundary_data(back.back());
      EXPECT_NEAR(d.tau, lambda, 1e-3);
      EXPECT_LT(d.mu, 1e-3);
    }
    EXPECT_EQ(reached, 25);
    EXPECT_EQ(monotone, 25);
  }
}

TEST(Trajectory, StationaryAtRadialPoint) {
  auto H = models::helmholtz(2, 1.0);
  Vec3 xhat{-0.6, 0.8, 0}, xi{0.6, -0.8, 0};  // incoming: xhat = -xi
  auto start = boundary_point(2, xhat, xi);
  auto path = flow_trajectory(H, start, 5, 0.01);
  for (size_t i = 0; i < start.size(); ++i) EXPECT_NEAR(path.back().c[i], start.c[i], 1e-14);
  auto csv = trajectory_csv(H, path);
  EXPECT_EQ(csv.rfind("step,chart,c0,c1,c2,c3,abs_p\n", 0), 0u);
}

TEST(Radial, HelmholtzSetsAndVerdicts) {
  for (double lambda : {1.0, 2.0}) {
    auto H = models::helmholtz(2, lambda);
    auto rep = analyze_radial_sets(H, 5);
    ASSERT_GT(rep.points.size(), 4u);
    size_t in = 0, out = 0;
    for (size_t k = 0; k < rep.points.size(); ++k) {
      auto d = helmholtz_boundary_data(rep.points[k]);
      EXPECT_NEAR(std::abs(d.tau), lambda, 1e-8);
      EXPECT_LT(d.mu, 1e-8);
      if (d.tau > 0) {
        ++in;
        EXPECT_EQ(rep.verdict[k], RadialVerdict::source);
        EXPECT_GT(rep.beta0[k], 0);
      } else {
        ++out;
        EXPECT_EQ(rep.verdict[k], RadialVerdict::sink);
        EXPECT_LT(rep.beta0[k], 0);
      }
      EXPECT_NEAR(rep.beta1[k] / rep.beta0[k], 2, 1e-6);
    }
    EXPECT_GT(in, 1u);
    EXPECT_GT(out, 1u);
  }
}

TEST(Radial, HelmholtzThreeDimensions) {
  auto H = models::helmholtz(3, 1.0);
  auto pts = find_radial_points(H, 4);
  ASSERT_FALSE(pts.empty());
  for (auto& p : pts) {
    auto d = helmholtz_boundary_data(p);
    EXPECT_NEAR(std::abs(d.tau), 1, 1e-8);
    EXPECT_LT(d.mu, 1e-8);
  }
}

TEST(Radial, ThresholdDataOutgoing) {
  auto H = models::helmholtz(2, 1.0);
  // R_out over xhat = e_1: beta0 = -xi_1 = -1, beta1 = -2
  auto p = boundary_point(2, {1, 0, 0}, {1, 0, 0});
  auto c = classify_radial(H, p);
  EXPECT_EQ(c.verdict, RadialVerdict::sink);
  for (auto e : c.eigenvalues) EXPECT_NEAR(e.real(), -1, 1e-8);
  auto t = threshold_data(H, p);
  EXPECT_NEAR(t.beta0, -1, 1e-8);
  EXPECT_NEAR(t.beta1, -2, 1e-8);
  EXPECT_EQ(t.threshold_order, -0.5);
  EXPECT_NEAR(threshold_data(H, p, 7.5).beta0, t.beta0, 1e-12);

  // incoming: same ratio, opposite sign
  auto q = boundary_point(2, {-1, 0, 0}, {1, 0, 0});
  auto tq = threshold_data(H, q);
  EXPECT_GT(tq.beta0, 0);
  EXPECT_NEAR(tq.beta1 / tq.beta0, 2, 1e-6);

  // overlapping charts over xhat = (1,1)/sqrt2
  const double r = 1 / std::sqrt(2.0);
  auto a = to_chart(ChartKind::spatial, 2, 0, {r, r, 0}, {r, r, 0});
  auto b = to_chart(ChartKind::spatial, 2, 1, {r, r, 0}, {r, r, 0});
  a.c[0] = b.c[0] = 0;
  auto ta = threshold_data(H, a), tb = threshold_data(H, b);
  EXPECT_NEAR(ta.beta1 / ta.beta0, 2, 1e-6);
  EXPECT_NEAR(tb.beta1 / tb.beta0, 2, 1e-6);
  EXPECT_NEAR(ta.beta0, -r, 1e-8);
}

TEST(Radial, KleinGordonCaps) {
  auto H = models::klein_gordon(2);
  auto rep = analyze_radial_sets(H, 5);
  ASSERT_FALSE(rep.points.empty());
  size_t future = 0, past = 0;
  for (size_t k = 0; k < rep.points.size(); ++k) {
    auto& p = rep.points[k];
    EXPECT_EQ(p.kind, ChartKind::kg);
    EXPECT_NEAR(p.c[1], 0, 1e-10);  // v = 0
    EXPECT_NEAR(p.c[2] * p.c[2] - p.c[3] * p.c[3], 1, 1e-10);
    if (p.sign > 0) {
      ++future;
      EXPECT_EQ(rep.verdict[k], RadialVerdict::sink);
    } else {
      ++past;
      EXPECT_EQ(rep.verdict[k], RadialVerdict::source);
    }
    for (auto e : rep.jacobian_eigenvalues[k]) EXPECT_NEAR(e.real(), -2 * p.sign * p.c[2], 1e-7);
  }
  EXPECT_GT(future, 1u);
  EXPECT_GT(past, 1u);
}

TEST(Radial, XDxFourConfigurations) {
  auto rep = analyze_radial_sets(models::xDx(), 5);
  ASSERT_EQ(rep.points.size(), 4u);
  int spatial = 0, fibre = 0;
  for (size_t k = 0; k < 4; ++k) {
    auto& p = rep.points[k];
    EXPECT_NEAR(p.c[1], 0, 1e-12);
    if (p.kind == ChartKind::spatial) {
      ++spatial;
      EXPECT_EQ(rep.verdict[k], RadialVerdict::sink);
    } else {
      ++fibre;
      EXPECT_EQ(rep.verdict[k], RadialVerdict::source);
    }
  }
  EXPECT_EQ(spatial, 2);
  EXPECT_EQ(fibre, 2);
}

TEST(Radial, DX1HandAnalysis) {
  // chart field y' = -sigma y in the x_1 chart, y_1' = sigma elsewhere: radial at xhat = +-e_1
  auto H = models::d_x1(2);
  auto rep = analyze_radial_sets(H, 5);
  ASSERT_FALSE(rep.points.empty());
  for (size_t k = 0; k < rep.points.size(); ++k) {
    auto& p = rep.points[k];
    EXPECT_EQ(p.axis, 0);
    EXPECT_NEAR(p.c[1], 0, 1e-12);
    EXPECT_NEAR(p.c[2], 0, 1e-12);  // Char: xi_1 = 0
    EXPECT_EQ(rep.verdict[k], p.sign > 0 ? RadialVerdict::sink : RadialVerdict::source);
  }
}

TEST(Radial, SchrodingerParabolic) {
  auto H = models::schrodinger(2);
  auto rep = analyze_radial_sets(H, 5);
  ASSERT_FALSE(rep.points.empty());
  bool timelike = false, parabolic = false;
  for (size_t k = 0; k < rep.points.size(); ++k) {
    auto& p = rep.points[k];
    if (p.kind == ChartKind::spatial) {
      timelike = true;
      EXPECT_NEAR(p.c[1], 2 * p.c[3], 1e-10);
      EXPECT_EQ(rep.verdict[k], p.sign > 0 ? RadialVerdict::sink : RadialVerdict::source);
    } else {
      parabolic = true;
      EXPECT_NEAR(p.c[2], p.fsign * 2 * p.c[1], 1e-10);
    }
    EXPECT_NEAR(rep.beta1[k] / rep.beta0[k], 2, 1e-6);
  }
  EXPECT_TRUE(timelike);
  EXPECT_TRUE(parabolic);
}

TEST(Radial, WaveLightConeDegenerate) {
  auto H = models::wave(2);
  PhasePointChart p;
  p.kind = ChartKind::spatial;
  p.n = 2;
  p.c = {0, 1.0, 0, 0};  // over the light cone |x| = t, zero section
  EXPECT_TRUE(boundary_chart_field(H, p).tangent);
  auto c = classify_radial(H, p);
  EXPECT_EQ(c.verdict, RadialVerdict::degenerate);
  EXPECT_THROW(threshold_data(H, p), PreconditionError);
  auto rep = analyze_radial_sets(H, 4);
  EXPECT_GT(rep.count(RadialVerdict::degenerate), 0u);
}

TEST(QuadraticDefiningFunction, GlueCrossTermCubic) {
  auto fit = glue_cross_term_fit(1.0, {0.08, 0.04, 0.02, 0.01, 0.005});
  EXPECT_GE(fit.slope, 2.9);
}

#include <gtest/gtest.h>

#include <random>

#include "scatcalc/symbol.hpp"

using namespace scatcalc;

namespace {

Symbol xi_symbol() {
  return make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0]); }, 1, 0);
}
Symbol x_symbol() {
  return make_symbol(1, [](const Vec3& x, const Vec3&) { return cplx(x[0]); }, 0, 1);
}
Symbol jxi_power(double p, double scale = 1) {
  return make_symbol(1, [p, scale](const Vec3&, const Vec3& k) { return cplx(std::pow(jp(k[0] / scale), p)); }, p, 0);
}

double gauss(double y) { return std::exp(-y * y / 2); }

Eigen::VectorXcd as_vector(const GridField& u) {
  return Eigen::Map<const Eigen::VectorXcd>(u.values.data(), u.values.size());
}

GridField schwartz_field(const GridSpec& g) {
  return GridField::sample(g, [](const Vec3& x) { return std::polar(std::exp(-x[0] * x[0] / 4), 0.7 * x[0]); });
}

}  // namespace

TEST(Quantize, OneIsIdentity) {
  for (int n : {1, 2}) {
    auto g = make_grid(n, 8.0, n == 1 ? 64 : 16);
    auto A = quantize(constant_symbol(n, 1.0), g);
    EXPECT_LT((A.matrix - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Quantize, XiIsSpectralDerivative) {
  auto g = make_grid(1, 20.0, 256);
  const double kappa = 3.0;
  auto u = GridField::sample(g, [&](const Vec3& x) { return std::polar(std::exp(-x[0] * x[0] / 2), kappa * x[0]); });
  GridField Au = quantize(xi_symbol(), g).apply(u);
  GridField Du = apply_multiplier(u, [](const Vec3& k) { return cplx(k[0]); });
  // closed form: D_x(e^{i kappa x} e^{-x^2/2}) = (kappa + i x) u
  for (size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(std::abs(Au.values[i] - Du.values[i]), 0, 1e-8);
    EXPECT_NEAR(std::abs(Au.values[i] - (kappa + I * g.x(i)) * u.values[i]), 0, 1e-8);
  }
}

TEST(Quantize, HelmholtzResolventInverse) {
  auto g = make_grid(1, 15.0, 128);
  auto inv = quantize(jxi_power(-2), g);
  auto lap = quantize(make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0] + 1); }, 2, 0), g);
  Eigen::MatrixXcd P = inv.matrix * lap.matrix;
  EXPECT_LT((P - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Quantize, Linearity) {
  auto g = make_grid(1, 10.0, 64);
  auto a = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(gauss(x[0]) * k[0], std::sin(k[0])); }, 1, 0);
  auto b = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(1 / jp(x[0]), jp(k[0])); }, 1, 0);
  const cplx al(2, -1), be(-0.5, 3);
  auto c = make_symbol(1, [&](const Vec3& x, const Vec3& k) { return al * a(x, k) + be * b(x, k); }, 1, 0);
  Eigen::MatrixXcd lhs = quantize(c, g).matrix, rhs = al * quantize(a, g).matrix + be * quantize(b, g).matrix;
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff() / rhs.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quantize, MatrixFreeAgreesWithDense) {
  auto g = make_grid(1, 10.0, 64);
  auto a = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(gauss(x[0]) * jp(k[0]), x[0] * 0.1); }, 1, 0);
  auto u = schwartz_field(g);
  for (bool right : {false, true}) {
    Eigen::VectorXcd dense = quantize(a, g, right).matrix * as_vector(u);
    Eigen::VectorXcd free = as_vector(apply_quantized(a, u, right));
    EXPECT_LT((dense - free).norm() / dense.norm(), 1e-12);
  }
}

TEST(Quantize, BudgetRejected) {
  EXPECT_THROW(quantize(constant_symbol(1, 1.0), make_grid(1, 10.0, 1024)), ConfigError);
  EXPECT_THROW(quantize(constant_symbol(2, 1.0), make_grid(2, 10.0, 128)), ConfigError);
}

TEST(SymbolFromKernel, RoundTripMultiplier) {
  auto g = make_grid(1, 15.0, 128);
  auto t = symbol_from_kernel(quantize(jxi_power(-2), g));
  for (size_t i = 0; i < g.size(); ++i)
    for (size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(std::abs(t.table(i, k) - 1 / (1 + g.xi(k) * g.xi(k))), 0, 1e-8);
}

TEST(SymbolFromKernel, RoundTripSchwartz) {
  auto g = make_grid(2, 6.0, 16);
  auto a = make_symbol(
      2, [](const Vec3& x, const Vec3& k) { return cplx(std::exp(-(x[0] * x[0] + x[1] * x[1]) / 3), k[0] * 0.2) / jp(k, 2); },
      -1, 0);
  auto t = symbol_from_kernel(quantize(a, g));
  double worst = 0;
  for (size_t i = 0; i < g.size(); ++i)
    for (size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(t.table(i, k) - a(g.point(i), g.freq(k))));
  EXPECT_LT(worst, 1e-8);
  auto s = t.as_symbol();
  EXPECT_NEAR(std::abs(s(g.point(37), g.freq(91)) - a(g.point(37), g.freq(91))), 0, 1e-8);
}

TEST(SymbolFromKernel, GaussianKernelGivesGaussianSymbol) {
  auto g = make_grid(1, 20.0, 256);
  auto t = symbol_from_kernel([](const Vec3& x, const Vec3& y) { return cplx(gauss(x[0] - y[0])); }, g);
  EXPECT_TRUE(t.decayed);
  // oracle: Gauss-Legendre quadrature of int e^{-i w xi} e^{-w^2/2} dw
  QuadRule q = gauss_legendre(160, -20, 20);
  for (int k : {128, 135, 150}) {
    double xi = g.xi(k);
    cplx quad = 0;
    for (size_t j = 0; j < q.nodes.size(); ++j) quad += q.weights[j] * gauss(q.nodes[j]) * std::polar(1.0, -q.nodes[j] * xi);
    EXPECT_NEAR(std::abs(t.table(100, k) - quad), 0, 1e-10);
    EXPECT_NEAR(std::abs(t.table(7, k) - std::sqrt(2 * pi) * gauss(xi)), 0, 1e-10);
  }
}

TEST(SymbolFromKernel, DeltaKernelGivesOne) {
  auto g = make_grid(1, 5.0, 32);
  const double h = g.h();
  auto t = symbol_from_kernel(
      [h](const Vec3& x, const Vec3& y) { return std::abs(x[0] - y[0]) < 1e-9 ? cplx(1 / h) : cplx(0); }, g);
  EXPECT_LT((t.table.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(SymbolFromKernel, NonDecayingFlagged) {
  auto g = make_grid(1, 5.0, 32);
  auto t = symbol_from_kernel([](const Vec3&, const Vec3&) { return cplx(1); }, g);
  EXPECT_FALSE(t.decayed);
}

TEST(Compose, TerminatingCase) {
  auto c = compose_expansion(xi_symbol(), x_symbol(), 2);
  for (double x : {-3.0, 0.5, 7.0})
    for (double k : {-2.0, 0.0, 11.0}) EXPECT_NEAR(std::abs(c({x, 0, 0}, {k, 0, 0}) - cplx(x * k, -1)), 0, 1e-9);
  // dense-matrix oracle on a Schwartz field, where Op(x) has no wrap-around
  auto g = make_grid(1, 20.0, 256);
  auto u = schwartz_field(g);
  Eigen::VectorXcd lhs = quantize(xi_symbol(), g).matrix * (quantize(x_symbol(), g).matrix * as_vector(u));
  auto target = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(x[0] * k[0], -1); }, 1, 1);
  Eigen::VectorXcd rhs = quantize(target, g).matrix * as_vector(u);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Compose, RightIdentity) {
  auto a = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(std::sin(x[0]) * k[0], jp(k[0])); }, 1, 0);
  auto c = compose_expansion(a, constant_symbol(1, 1.0), 3);
  for (double x : {-1.0, 2.0})
    for (double k : {0.0, 5.0}) EXPECT_EQ(c({x, 0, 0}, {k, 0, 0}), a({x, 0, 0}, {k, 0, 0}));
}

TEST(Compose, ResidualDecreasesPerTerm) {
  // <xi/3>^-1 and <x/3>^-1: each added term gains (ST)^-1 = 1/9 in the leading constant
  auto g = make_grid(1, 80.0, 512);
  auto a = jxi_power(-1, 3);
  auto b = make_symbol(1, [](const Vec3& x, const Vec3&) { return cplx(1 / jp(x[0] / 3)); }, 0, -1);
  Eigen::MatrixXcd AB = quantize(a, g).matrix * quantize(b, g).matrix;
  double prev = INFINITY;
  for (int N = 1; N <= 3; ++N) {
    double r = band_limited_norm(AB - quantize(compose_expansion(a, b, N), g).matrix, g);
    EXPECT_LT(2 * r, prev) << "N_terms " << N;
    prev = r;
  }
}

TEST(Compose, TermBudget) {
  EXPECT_THROW(compose_expansion(xi_symbol(), x_symbol(), 5), std::invalid_argument);
}

TEST(PoissonBracket, Examples) {
  auto b = make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(std::sin(x[0]) * k[0] * k[0], x[0]); }, 2, 1);
  auto pb = poisson_bracket(xi_symbol(), b);
  auto sq = poisson_bracket(make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0]); }, 2, 0),
                            make_symbol(1, [](const Vec3& x, const Vec3&) { return cplx(x[0] * x[0]); }, 0, 2));
  auto aa = poisson_bracket(b, b);
  auto ba = poisson_bracket(b, xi_symbol());
  for (double x : {-2.0, 0.3, 4.0})
    for (double k : {-1.5, 0.0, 3.0}) {
      Vec3 X{x, 0, 0}, K{k, 0, 0};
      EXPECT_NEAR(std::abs(pb(X, K) - cplx(std::cos(x) * k * k, 1)), 0, 1e-7);
      EXPECT_NEAR(std::abs(sq(X, K) - 4 * x * k), 0, 1e-7);
      EXPECT_NEAR(std::abs(aa(X, K)), 0, 1e-12);
      EXPECT_NEAR(std::abs(pb(X, K) + ba(X, K)), 0, 1e-12);
    }
}

TEST(CommutatorLaw, BracketIsPrincipalSymbol) {
  auto g = make_grid(1, 60.0, 512);
  auto pairs_at = [](double s) {
    std::vector<std::pair<Symbol, Symbol>> p;
    p.push_back({make_symbol(1, [s](const Vec3&, const Vec3& k) { return cplx(s * jp(k[0] / s)); }, 1, 0),
                 make_symbol(1, [s](const Vec3& x, const Vec3& k) { return cplx(k[0] * gauss(x[0] / s)); }, 1, 0)});
    p.push_back({make_symbol(1, [s](const Vec3& x, const Vec3& k) { return cplx(k[0] * (1 + 0.5 * gauss(x[0] / s))); }, 1, 0),
                 make_symbol(1, [s](const Vec3& x, const Vec3& k) { return cplx(s * jp(k[0] / s) / std::cosh(x[0] / s)); }, 1, 0)});
    p.push_back({make_symbol(1, [s](const Vec3& x, const Vec3& k) { return cplx(s * jp(k[0] / s) * gauss(x[0] / s)); }, 1, 0),
                 make_symbol(1, [s](const Vec3& x, const Vec3& k) {
                   return cplx(k[0] * k[0] / (s * jp(k[0] / s)) * s * std::tanh(x[0] / s) / jp(x[0]));
                 }, 1, 0)});
    return p;
  };
  auto ratio = [&](const Symbol& a, const Symbol& b) {
    Eigen::MatrixXcd A = quantize(a, g).matrix, B = quantize(b, g).matrix, C = quantize(poisson_bracket(a, b), g).matrix;
    Eigen::MatrixXcd comm = I * (A * B - B * A);
    return band_limited_norm(comm - C, g) / band_limited_norm(C, g);
  };
  auto base = pairs_at(1), doubled = pairs_at(2);
  for (size_t i = 0; i < base.size(); ++i) {
    double r1 = ratio(base[i].first, base[i].second), r2 = ratio(doubled[i].first, doubled[i].second);
    EXPECT_LE(r1, 0.15) << "pair " << i;
    EXPECT_LT(r2, r1) << "pair " << i;
  }
}

TEST(Parametrix, NeumannSeriesContracts) {
  auto g = make_grid(1, 20.0, 128);
  auto a = make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0] + 1); }, 2, 0);
  auto res = parametrix(a, 3, g);
  ASSERT_EQ(res.residuals.size(), 4u);
  for (size_t j = 1; j < res.residuals.size(); ++j) EXPECT_LE(2 * res.residuals[j], res.residuals[j - 1]);
  EXPECT_EQ(res.B.m, -2);
  // residual kernel decays off the diagonal
  Eigen::MatrixXcd Rk = quantize(a, g).matrix * res.B.matrix - Eigen::MatrixXcd::Identity(g.size(), g.size());
  double near = Rk.row(64).segment(60, 9).cwiseAbs().maxCoeff(), far = std::abs(Rk(64, 0)) + std::abs(Rk(64, 127));
  EXPECT_LT(far, 1e-3 * near);
}

TEST(Parametrix, NonEllipticRejected) {
  auto g = make_grid(1, 20.0, 64);
  auto a = make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0]); }, 2, 0);
  EXPECT_THROW(parametrix(a, 2, g), PreconditionError);
  EXPECT_EQ(ellipticity_floor(a), 0.0);
}

TEST(Parametrix, UnitSymbol) {
  // the regularized b0 is 2/3 for a = 1, so B_N = 1 - 3^{-(N+1)} converges geometrically to 1
  auto g = make_grid(1, 10.0, 64);
  auto res = parametrix(constant_symbol(1, 1.0), 6, g);
  for (size_t j = 0; j < res.residuals.size(); ++j) EXPECT_NEAR(res.residuals[j], std::pow(3.0, -double(j + 1)), 1e-12);
  EXPECT_LT((res.symbol.table.array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(Seminorm, InverseJapaneseBracketOracle) {
  auto rep = conormal_seminorm(jxi_power(-1), 2);
  EXPECT_TRUE(rep.in_class);
  // analytic sups: |a| <xi> = 1, <xi>^2 |a'| = |xi|/<xi> -> 1, <xi>^3 |a''| = |2xi^2-1|/<xi>^2 -> 2
  std::map<int, double> expect{{0, 1.0}, {1, 1024 / jp(1024)}, {2, (2.0 * 1024 * 1024 - 1) / (1024.0 * 1024 + 1)}};
  for (auto& e : rep.per_multiindex) {
    if (e.alpha[0] > 0) {
      EXPECT_NEAR(e.value, 0, 1e-12);
      continue;
    }
    EXPECT_NEAR(e.value, expect[e.beta[0]], 1e-4 * expect[e.beta[0]]);
  }
  EXPECT_NEAR(rep.value, 2.0, 1e-4);
}

TEST(Seminorm, UnitSymbol) {
  for (int k : {0, 2, 4}) {
    auto rep = conormal_seminorm(constant_symbol(2, 1.0), k);
    EXPECT_DOUBLE_EQ(rep.value, 1.0);
    for (auto& e : rep.per_multiindex) {
      bool zero = order_of(e.alpha) == 0 && order_of(e.beta) == 0;
      EXPECT_EQ(e.value, zero ? 1.0 : 0.0);
    }
  }
}

TEST(Seminorm, VariableOrderLogLossFlagged) {
  // <x>^{o(xi)} with o = -0.1 xi^2 / <xi>^2: xi-derivatives pick up a log<x> factor
  auto a = make_symbol(1, [](const Vec3& x, const Vec3& k) {
    return cplx(std::pow(jp(x[0]), -0.1 * k[0] * k[0] / (1 + k[0] * k[0])));
  }, 0, 0);
  auto rep0 = conormal_seminorm(a, 0);
  EXPECT_TRUE(rep0.in_class);
  EXPECT_NEAR(rep0.value, 1.0, 1e-12);
  auto rep = conormal_seminorm(a, 2);
  EXPECT_FALSE(rep.in_class);
  EXPECT_GT(rep.log_growth, 0);
}

TEST(Seminorm, BudgetEnforced) { EXPECT_THROW(conormal_seminorm(xi_symbol(), 5), std::invalid_argument); }

TEST(OperatorNorm, Identity) {
  auto g = make_grid(1, 10.0, 64);
  SobolevOrder o{0, 0, {}};
  EXPECT_NEAR(operator_norm_estimate(DenseOperator::identity(g), o, o), 1.0, 1e-10);
}

TEST(OperatorNorm, SmoothingMultiplierStable) {
  double prev = 0;
  for (int N : {64, 128}) {
    auto g = make_grid(1, 10.0, N);
    double v = operator_norm_estimate(quantize(jxi_power(-1), g), {0, 0, {}}, {1, 0, {}});
    EXPECT_NEAR(v, 1.0, 0.1);
    if (prev > 0) {
      EXPECT_NEAR(v / prev, 1.0, 0.1);
    }
    prev = v;
  }
}

TEST(OperatorNorm, DerivativeUnbounded) {
  for (int N : {64, 128, 256}) {
    auto g = make_grid(1, 10.0, N);
    double v = operator_norm_estimate(quantize(xi_symbol(), g), {0, 0, {}}, {0, 0, {}});
    EXPECT_NEAR(v / (pi / g.h()), 1.0, 1e-8);
  }
}

TEST(OperatorNorm, Submultiplicative) {
  auto g = make_grid(1, 10.0, 64);
  auto A = quantize(make_symbol(1, [](const Vec3& x, const Vec3& k) { return cplx(gauss(x[0]), k[0] / jp(k[0])); }, 0, 0), g);
  auto B = quantize(jxi_power(-1), g);
  SobolevOrder o{0, 0, {}};
  EXPECT_LE(operator_norm_estimate(A * B, o, o), operator_norm_estimate(A, o, o) * operator_norm_estimate(B, o, o) * (1 + 1e-12));
}

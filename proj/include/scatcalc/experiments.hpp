#pragma once

#include <chrono>
#include <fstream>
#include <random>

#include "commutant.hpp"
#include "hamilton.hpp"
#include "helmholtz.hpp"
#include "radon.hpp"
#include "report.hpp"
#include "scatter1d.hpp"
#include "symbol.hpp"

namespace scatcalc::experiments {

using schema::choice;
using schema::integer;
using schema::list;
using schema::number;
using schema::text;

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

inline std::vector<double> doubles(const ojson& v) { return v.get<std::vector<double>>(); }

inline GridSpec grid_from(const ojson& g) { return make_grid(g["n"].get<int>(), g["L"].get<double>(), g["N"].get<int>()); }

inline Vec3 unit_vec(int n, double a, double b = 0) {
  if (n == 2) return {std::cos(a), std::sin(a), 0};
  return {std::cos(a) * std::cos(b), std::sin(a) * std::cos(b), std::sin(b)};
}

inline Vec3 random_unit(std::mt19937& rng, int n) {
  std::normal_distribution<double> g;
  Vec3 v{0, 0, 0};
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  double r = std::sqrt(norm2(v, n));
  for (int i = 0; i < n; ++i) v[i] /= r;
  return v;
}

inline double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

// Smooth non-harmonic test density used by the asymptotic checks.
inline SphereDensity smooth_test_density(int n) {
  return {n, [](const Vec3& w) { return std::exp(0.5 * w[0] - 0.3 * w[1] + 0.2 * w[2]) * cplx(1, 0.25 * w[1]); }};
}

inline SymbolHamiltonian build_model(const std::string& name, int n, double lambda, double mass) {
  if (name == "helmholtz") return models::helmholtz(n, lambda);
  if (name == "klein_gordon") return models::klein_gordon(n, mass);
  if (name == "schrodinger") return models::schrodinger(n);
  if (name == "wave") return models::wave(n);
  throw ConfigError("unknown model " + name);
}

// ---- flow -----------------------------------------------------------------------------

inline std::vector<Field> flow_schema() {
  return {{"n", 2, integer(2, 3)},
          {"lambda", 1.0, number(0, 100, true)},
          {"trajectories", 50, integer(1, 1000)},
          {"T", 20.0, number(0, 200, true)},
          {"dt", 0.01, number(1e-4, 0.5)},
          {"tolerance", 1e-3, number(0, 1, true)}};
}

// Random boundary points of the Helmholtz characteristic set flowed forward; each must
// approach the outgoing radial set.
inline RunReport run_flow(const ojson& c, unsigned seed) {
  RunReport rep;
  const int n = c["n"];
  const double lambda = c["lambda"], T = c["T"], dt = c["dt"], tol = c["tolerance"];
  auto H = models::helmholtz(n, lambda);
  std::mt19937 rng(seed);
  auto& tab = rep.table("trajectories", {"index", "xhat_1", "xhat_2", "xhat_3", "xi_1", "xi_2", "xi_3", "steps",
                                         "final_distance", "max_abs_p"});
  int reached = 0;
  double worst = 0, pmax = 0;
  const int count = c["trajectories"];
  for (int k = 0; k < count; ++k) {
    Vec3 xhat = random_unit(rng, n), xi = random_unit(rng, n);
    for (int i = 0; i < n; ++i) xi[i] *= lambda;
    auto start = boundary_point(n, xhat, xi);
    auto path = flow_trajectory(H, start, T, dt);
    double p = 0;
    for (auto& q : path) p = std::max(p, std::abs(chart_symbol(H, q)));
    double d = distance_to_outgoing(path.back());
    if (d < tol) ++reached;
    worst = std::max(worst, d);
    pmax = std::max(pmax, p);
    tab.add({k, xhat[0], xhat[1], xhat[2], xi[0], xi[1], xi[2], path.size() - 1, d, p});
  }
  rep.metrics["reached"] = reached;
  rep.metrics["worst_final_distance"] = worst;
  rep.metrics["max_abs_p"] = pmax;
  rep.check("trajectories_reach_outgoing", reached == count,
            std::to_string(reached) + "/" + std::to_string(count) + " within " + fmt(tol) + " at flow parameter " + fmt(T) +
                ", worst " + fmt(worst));
  rep.check("characteristic_preserved", pmax < 1e-6, "max |p| along paths " + fmt(pmax));
  return rep;
}

// ---- radial ---------------------------------------------------------------------------

inline std::vector<Field> radial_schema() {
  return {{"model", "helmholtz", choice({"helmholtz", "klein_gordon", "schrodinger", "wave"})},
          {"n", 2, integer(2, 3)},
          {"lambda", 1.0, number(0, 100, true)},
          {"mass", 1.0, number(0, 100, true)},
          {"resolution", 5, integer(3, 8)},
          {"tolerance", 1e-8, number(0, 1, true)},
          {"ratio_tolerance", 1e-6, number(0, 1, true)}};
}

inline RunReport run_radial(const ojson& c, unsigned) {
  RunReport rep;
  const std::string model = c["model"];
  const int n = c["n"];
  const double lambda = c["lambda"], tol = c["tolerance"], rtol = c["ratio_tolerance"];
  auto H = build_model(model, n, lambda, c["mass"]);
  auto rs = analyze_radial_sets(H, c["resolution"]);
  const bool helm = model == "helmholtz";
  std::vector<std::string> cols{"chart", "verdict", "beta0", "beta1", "ratio"};
  for (int i = 0; i < 6; ++i) cols.push_back("c" + std::to_string(i));
  if (helm) cols.insert(cols.end(), {"tau", "mu"});
  auto& tab = rep.table("radial_points", cols);
  double tau_err = 0, mu_max = 0, ratio_err = 0;
  size_t in = 0, out = 0, in_ok = 0, out_ok = 0;
  for (size_t k = 0; k < rs.points.size(); ++k) {
    const auto& p = rs.points[k];
    const double b0 = rs.beta0[k], b1 = rs.beta1[k];
    const double ratio = b0 != 0 ? b1 / b0 : NAN;
    std::vector<ojson> row{p.id(), verdict_name(rs.verdict[k]), b0, b1, ratio};
    for (int i = 0; i < 6; ++i) row.push_back(i < int(p.size()) ? p.c[i] : 0.0);
    if (helm) {
      auto d = helmholtz_boundary_data(p);
      row.push_back(d.tau);
      row.push_back(d.mu);
      tau_err = std::max(tau_err, std::abs(std::abs(d.tau) - lambda));
      mu_max = std::max(mu_max, d.mu);
      ratio_err = std::max(ratio_err, std::isfinite(ratio) ? std::abs(ratio - 2) : INFINITY);
      if (d.tau > 0) {
        ++in;
        in_ok += rs.verdict[k] == RadialVerdict::source;
      } else {
        ++out;
        out_ok += rs.verdict[k] == RadialVerdict::sink;
      }
    }
    tab.add(std::move(row));
  }
  rep.metrics["points"] = rs.points.size();
  for (auto v : {RadialVerdict::source, RadialVerdict::sink, RadialVerdict::saddle, RadialVerdict::degenerate})
    rep.metrics[std::string(verdict_name(v)) + "_count"] = rs.count(v);
  rep.metrics["threshold_order"] = rs.threshold_order;
  if (helm) {
    rep.metrics["max_tau_error"] = tau_err;
    rep.metrics["max_mu"] = mu_max;
    rep.metrics["max_ratio_error"] = ratio_err;
    rep.check("tau_on_shell", !rs.points.empty() && tau_err < tol, "max ||tau| - lambda| " + fmt(tau_err));
    rep.check("mu_vanishes", !rs.points.empty() && mu_max < tol, "max |mu| " + fmt(mu_max));
    rep.check("incoming_is_source", in > 0 && in_ok == in, std::to_string(in_ok) + "/" + std::to_string(in) + " sources");
    rep.check("outgoing_is_sink", out > 0 && out_ok == out, std::to_string(out_ok) + "/" + std::to_string(out) + " sinks");
    rep.check("beta_ratio", !rs.points.empty() && ratio_err < rtol, "max |beta1/beta0 - 2| " + fmt(ratio_err));
    // two overlapping spatial charts over xhat = (1,1,0)/sqrt2 at the outgoing point
    const double r = 1 / std::sqrt(2.0);
    double chart_err = 0;
    for (int axis : {0, 1}) {
      auto q = to_chart(ChartKind::spatial, n, axis, {r, r, 0}, {r * lambda, r * lambda, 0});
      q.c[0] = 0;
      auto t = threshold_data(H, q);
      chart_err = std::max(chart_err, std::abs(t.beta1 / t.beta0 - 2));
      rep.metrics["beta0_chart_" + std::to_string(axis)] = t.beta0;
      rep.metrics["beta1_chart_" + std::to_string(axis)] = t.beta1;
    }
    rep.check("beta_ratio_two_charts", chart_err < rtol, "max |beta1/beta0 - 2| over charts x_1 > 0, x_2 > 0: " + fmt(chart_err));
  } else if (model == "wave") {
    PhasePointChart p;
    p.kind = ChartKind::spatial;
    p.n = n;
    p.c = {0, 1.0, 0, 0, 0, 0};  // light cone |x| = t over the zero section
    auto cls = classify_radial(H, p);
    bool rejected = false;
    try {
      threshold_data(H, p);
    } catch (const PreconditionError&) {
      rejected = true;
    }
    rep.check("light_cone_degenerate", cls.verdict == RadialVerdict::degenerate && rejected &&
                                           rs.count(RadialVerdict::degenerate) > 0,
              std::string("light-cone verdict ") + verdict_name(cls.verdict) + ", threshold data " +
                  (rejected ? "refused" : "computed") + ", " + std::to_string(rs.count(RadialVerdict::degenerate)) +
                  " degenerate points in the scan");
  } else {
    rep.check("radial_points_found", !rs.points.empty(), std::to_string(rs.points.size()) + " points");
  }
  return rep;
}

// ---- quantize-check -------------------------------------------------------------------

inline std::vector<Field> quantize_schema() {
  return {schema::grid("grid", 1, 20.0, 256),
          schema::grid("commutator_grid", 1, 60.0, 512, 1),
          schema::grid("parametrix_grid", 1, 20.0, 128, 1),
          {"scale_factor", 2.0, number(1, 8, true)},
          {"commutator_tolerance", 0.15, number(0, 1, true)},
          {"parametrix_terms", 3, integer(1, 6)},
          {"contraction_factor", 2.0, number(1, 100)}};
}

namespace detail {

inline double gauss(double y) { return std::exp(-y * y / 2); }

// Classical order (1,0) pairs with spatial and frequency scale s.
inline std::vector<std::pair<Symbol, Symbol>> commutator_pairs(double s) {
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
}

}  // namespace detail

inline RunReport run_quantize(const ojson& c, unsigned) {
  RunReport rep;
  // identity
  auto g = grid_from(c["grid"]);
  const int n = g.n;
  auto Id = quantize(constant_symbol(n, 1.0), g);
  double id_err = (Id.matrix - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff();
  rep.metrics["identity_error"] = id_err;
  rep.check("quantization_identity", id_err < 1e-10, "max |Op(1) - Id| " + fmt(id_err));

  // Op(xi_1) Op(x_1) against Op(x_1 xi_1 - i) on a Schwartz field (no wrap-around)
  auto xi = make_symbol(n, [](const Vec3&, const Vec3& k) { return cplx(k[0]); }, 1, 0);
  auto x = make_symbol(n, [](const Vec3& y, const Vec3&) { return cplx(y[0]); }, 0, 1);
  auto comp = compose_expansion(xi, x, 2);
  double sym_err = 0;
  for (double a : {-3.0, 0.5, 7.0})
    for (double k : {-2.0, 0.0, 11.0}) sym_err = std::max(sym_err, std::abs(comp({a, 0, 0}, {k, 0, 0}) - cplx(a * k, -1)));
  auto u = GridField::sample(g, [n](const Vec3& y) {
    double r2 = norm2(y, n);
    return std::polar(std::exp(-r2 / 4), 0.7 * y[0]);
  });
  Eigen::Map<const Eigen::VectorXcd> uv(u.values.data(), u.values.size());
  Eigen::VectorXcd lhs = quantize(xi, g).matrix * (quantize(x, g).matrix * uv);
  auto target = make_symbol(n, [](const Vec3& y, const Vec3& k) { return cplx(y[0] * k[0], -1); }, 1, 1);
  Eigen::VectorXcd rhs = quantize(target, g).matrix * uv;
  double dense_err = (lhs - rhs).cwiseAbs().maxCoeff();
  rep.metrics["composition_symbol_error"] = sym_err;
  rep.metrics["composition_dense_error"] = dense_err;
  rep.check("composition_oracle", sym_err < 1e-9 && dense_err < 1e-9,
            "expansion " + fmt(sym_err) + ", dense product " + fmt(dense_err));

  // commutators
  auto cg = grid_from(c["commutator_grid"]);
  auto ratio = [&](const Symbol& a, const Symbol& b) {
    Eigen::MatrixXcd A = quantize(a, cg).matrix, B = quantize(b, cg).matrix, C = quantize(poisson_bracket(a, b), cg).matrix;
    Eigen::MatrixXcd cm = I * (A * B - B * A);
    return band_limited_norm(cm - C, cg) / band_limited_norm(C, cg);
  };
  const double s2 = c["scale_factor"], ctol = c["commutator_tolerance"];
  auto base = detail::commutator_pairs(1), scaled = detail::commutator_pairs(s2);
  auto& ct = rep.table("commutator", {"pair", "ratio", "ratio_scaled"});
  bool bound = true, improves = true;
  double worst = 0;
  for (size_t i = 0; i < base.size(); ++i) {
    double r1 = ratio(base[i].first, base[i].second), r2 = ratio(scaled[i].first, scaled[i].second);
    ct.add({i, r1, r2});
    bound = bound && r1 <= ctol;
    improves = improves && r2 < r1;
    worst = std::max(worst, r1);
  }
  rep.metrics["commutator_worst_ratio"] = worst;
  rep.check("commutator_bound", bound, "worst ratio " + fmt(worst) + " (limit " + fmt(ctol) + ")");
  rep.check("commutator_improves_with_scale", improves, "every pair improves at scale x" + fmt(s2));

  // parametrix
  auto pg = grid_from(c["parametrix_grid"]);
  auto a = make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0] + 1); }, 2, 0);
  auto res = parametrix(a, c["parametrix_terms"], pg);
  auto& pt = rep.table("parametrix", {"terms", "residual"});
  const double factor = c["contraction_factor"];
  bool contracts = true;
  for (size_t j = 0; j < res.residuals.size(); ++j) {
    pt.add({j, res.residuals[j]});
    if (j && factor * res.residuals[j] > res.residuals[j - 1]) contracts = false;
  }
  rep.check("neumann_contracts", contracts, "residuals " + fmt(res.residuals.front()) + " -> " + fmt(res.residuals.back()));
  bool rejected = false;
  try {
    parametrix(make_symbol(1, [](const Vec3&, const Vec3& k) { return cplx(k[0] * k[0]); }, 2, 0), 2, pg);
  } catch (const PreconditionError&) {
    rejected = true;
  }
  rep.check("non_elliptic_rejected", rejected, rejected ? "xi^2 refused" : "xi^2 accepted");
  return rep;
}

// ---- commutant ------------------------------------------------------------------------

inline std::vector<Field> commutant_schema() {
  return {{"samples", 20, integer(1, 200)},
          {"box", 4.0, number(1, 20)},
          {"quadrature_points", 161, integer(33, 401, false, true)},
          {"s0", 1.0, number(0, 10, true)},
          {"eps", 0.25, number(0, 1, true)},
          {"digamma", 10.0, number(0, 1e4)},
          {"radial_order", -1.0, number(-5, 3)},
          {"radial_delta", 0.05, number(0, 1, true)},
          {"residual_tolerance", 1e-8, number(0, 1, true)}};
}

inline RunReport run_commutant(const ojson& c, unsigned seed) {
  RunReport rep;
  const double tol = c["residual_tolerance"];
  auto samples = model_estimate_check(c["samples"], seed, c["box"], c["quadrature_points"]);
  auto& st = rep.table("estimate", {"sample", "bu", "eu", "f2", "rhs", "holds"});
  size_t held = 0;
  double margin = INFINITY;
  for (size_t k = 0; k < samples.size(); ++k) {
    auto& s = samples[k];
    st.add({k, s.bu, s.eu, s.f2, s.rhs(), s.holds()});
    held += s.holds();
    margin = std::min(margin, s.rhs() - s.bu);
  }
  rep.metrics["estimate_min_margin"] = margin;
  rep.check("quantitative_estimate", held == samples.size(),
            std::to_string(held) + "/" + std::to_string(samples.size()) + " samples satisfy <bu,u> <= 2<eu,u> + 36||f||^2");

  CommutantParams p;
  p.s0 = c["s0"];
  p.eps = c["eps"];
  p.digamma = c["digamma"];
  auto cb = build_propagation_commutant(p);
  rep.metrics["propagation_residual"] = cb.residual_sup;
  rep.metrics["propagation_digamma"] = cb.digamma;
  rep.check("propagation_identity", cb.residual_sup < tol, "sup residual " + fmt(cb.residual_sup));

  RadialCommutantParams rp;
  rp.r = c["radial_order"];
  rp.delta = c["radial_delta"];
  auto rr = radial_commutant_check(rp);
  rep.metrics["radial_residual"] = rr.residual_sup;
  rep.metrics["radial_below_threshold"] = rr.below_threshold;
  rep.check("radial_identity", rr.residual_sup < tol, "sup residual " + fmt(rr.residual_sup) + " at r = " + fmt(rp.r));
  RadialCommutantParams th = rp;
  th.r = -0.5;
  bool rejected = false;
  try {
    radial_commutant_check(th);
  } catch (const PreconditionError&) {
    rejected = true;
  }
  rep.check("threshold_rejected", rejected, rejected ? "r = -1/2 refused" : "r = -1/2 accepted");
  return rep;
}

// ---- helmholtz ------------------------------------------------------------------------

inline std::vector<Field> helmholtz_schema() {
  return {{"lambda", 1.0, number(0, 10, true)},
          {"dims", {2, 3}, list(integer(2, 3), 1, 2)},
          {"radii", {20, 32, 50, 80, 125, 200}, list(number(5, 2000), 3, 20)},
          {"slope_tolerance", 0.2, number(0, 2, true)},
          {"densities", 10, integer(1, 100)},
          {"harmonic_degree", 4, integer(0, 12)},
          {"smatrix_radius", 10.0, number(1, 100)},
          {"smatrix_nodes", 48, integer(16, 1024)},
          {"smatrix_modes", 3, integer(0, 8)},
          {"fixture", "", text()},
          {"series_radii", {10, 14, 20, 28, 40}, list(number(2, 1000), 3, 20)},
          {"series_terms", 2, integer(1, 4)},
          {"series_gain", 0.9, number(0, 5)},
          {"obstruction_power", 0.8, number(-5, 5)}};
}

// Phase constants from a fixture file {"phase": {"2": [re, im], "3": [re, im]}}.
inline std::map<int, cplx> load_phase_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read fixture " + path);
  std::map<int, cplx> out;
  try {
    auto j = nlohmann::json::parse(in);
    for (int n : {2, 3}) {
      auto ph = j.at("phase").at(std::to_string(n));
      out[n] = cplx(ph.at(0).get<double>(), ph.at(1).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("fixture " + path + ": " + e.what());
  }
  return out;
}

inline RunReport run_helmholtz(const ojson& c, unsigned seed) {
  RunReport rep;
  const double lambda = c["lambda"];
  const auto dims = c["dims"].get<std::vector<int>>();
  const auto radii = doubles(c["radii"]);
  std::mt19937 rng(seed);

  // stationary phase remainder
  auto& sp = rep.table("stationary_phase", {"n", "r", "error"});
  for (int n : dims) {
    auto e = stationary_phase_errors(smooth_test_density(n), lambda, unit_vec(n, 0.3, 0.2), radii);
    for (size_t k = 0; k < e.radii.size(); ++k) sp.add({n, e.radii[k], e.errors[k]});
    const double want = -(n + 1) / 2.0, tol = c["slope_tolerance"];
    rep.metrics["slope_n" + std::to_string(n)] = e.fit.slope;
    rep.check("stationary_phase_n" + std::to_string(n), std::abs(e.fit.slope - want) <= tol,
              "slope " + fmt(e.fit.slope) + " vs " + fmt(want) + " +- " + fmt(tol));
  }

  // free scattering matrix: unitarity and equivariance on random harmonic densities
  const int L = c["harmonic_degree"];
  auto random_harmonic = [&](int n, int deg) {
    std::normal_distribution<double> g;
    HarmonicDensity h{n, deg, {}};
    h.coeffs.resize(h.size());
    for (auto& x : h.coeffs) x = cplx(g(rng), g(rng));
    return h;
  };
  double defect = 0;
  const int count = c["densities"];
  for (int n : dims)
    for (int k = 0; k < count; ++k) {
      auto fm = random_harmonic(n, L).as_density();
      double a = sphere_l2_norm(fm), b = sphere_l2_norm(free_scattering_matrix(lambda, fm));
      defect = std::max(defect, std::abs(b - a) / a);
    }
  rep.metrics["unitarity_defect"] = defect;
  rep.check("smatrix_unitary", defect < 1e-6, "max | ||S f|| - ||f|| | / ||f|| over " + std::to_string(count) +
                                                  " densities per dimension: " + fmt(defect));
  const double ang = 0.37;
  auto rot = [ang](const Vec3& w, double s) {
    return Vec3{std::cos(s * ang) * w[0] - std::sin(s * ang) * w[1], std::sin(s * ang) * w[0] + std::cos(s * ang) * w[1], w[2]};
  };
  double equi = 0;
  for (int n : dims) {
    auto f = random_harmonic(n, std::max(L - 1, 0)).as_density();
    SphereDensity rf{n, [&](const Vec3& w) { return f(rot(w, -1)); }};
    auto s_rf = free_scattering_matrix(lambda, rf), sf = free_scattering_matrix(lambda, f);
    for (int k = 0; k < 20; ++k) {
      Vec3 w = unit_vec(n, 0.31 * k, n == 3 ? 0.05 * k - 0.5 : 0);
      equi = std::max(equi, std::abs(s_rf(w) - sf(rot(w, -1))));
    }
  }
  rep.metrics["equivariance_error"] = equi;
  rep.check("smatrix_equivariant", equi < 1e-8, "max |S(R f) - R S f| " + fmt(equi));

  // constant from mode projections at two quadrature levels
  std::map<int, cplx> reference;
  const std::string fixture = c["fixture"];
  if (fixture.empty())
    for (int n : dims) reference[n] = free_smatrix_phase(n);
  else
    reference = load_phase_fixture(fixture);
  auto& mt = rep.table("smatrix_modes", {"n", "l", "m", "phase_re", "phase_im", "refined_re", "refined_im", "refinement_change",
                                         "reference_error"});
  double change = 0, ref_err = 0;
  const int nodes = c["smatrix_nodes"];
  for (int n : dims)
    for (int l = 0; l <= int(c["smatrix_modes"]); ++l) {
      int m = n == 2 ? -l : l / 2;
      auto a = smatrix_phase_from_mode(n, l, m, lambda, c["smatrix_radius"], nodes);
      auto b = smatrix_phase_from_mode(n, l, m, lambda, c["smatrix_radius"], 2 * nodes);
      double ch = std::abs(a.phase - b.phase), re = std::abs(b.phase - reference.at(n));
      change = std::max(change, ch);
      ref_err = std::max(ref_err, re);
      mt.add({n, l, m, a.phase.real(), a.phase.imag(), b.phase.real(), b.phase.imag(), ch, re});
    }
  rep.metrics["smatrix_refinement_change"] = change;
  rep.metrics["smatrix_reference_error"] = ref_err;
  rep.check("smatrix_constant_stable", change < 1e-6 && ref_err < 1e-6,
            "refinement change " + fmt(change) + ", distance to " + (fixture.empty() ? "library constant " : "fixture ") +
                fmt(ref_err));

  // formal series: obstruction by finite differences, then decay gain per term
  const double pw = c["obstruction_power"];
  double ob_err = 0;
  bool rejected = true;
  for (int n : dims) {
    if (std::abs(pw - (n - 1) / 2.0) < 1e-9) continue;
    auto u = [&](const Vec3& x) {
      double r = std::sqrt(norm2(x, n));
      return std::pow(r, -pw) * std::exp(-I * (lambda * r));
    };
    // leading coefficient of r^{p+1} e^{i lambda r} (Delta - lambda^2) u, extrapolated in 1/r
    auto lead = [&](double r) {
      Vec3 x = unit_vec(n, 0.4, 0.3);
      for (auto& v : x) v *= r;
      return helmholtz_residual_fd(u, n, lambda, x) * std::pow(r, pw + 1) * std::exp(I * (lambda * r));
    };
    cplx est = 2.0 * lead(400) - lead(200);
    cplx want = formal_obstruction(pw, n, lambda);
    ob_err = std::max(ob_err, std::abs(est - want) / std::abs(want));
    rep.metrics["obstruction_n" + std::to_string(n) + "_re"] = est.real();
    rep.metrics["obstruction_n" + std::to_string(n) + "_im"] = est.imag();
    HarmonicDensity a{n, 1, {}};
    a.coeffs.assign(a.size(), 1.0);
    try {
      poisson_series_step(a, 0, lambda, n, -1, pw);
      rejected = false;
    } catch (const PreconditionError&) {
    }
  }
  rep.check("formal_obstruction", ob_err < 1e-3 && rejected,
            "finite-difference coefficient vs i lambda (2p - n + 1): relative error " + fmt(ob_err) +
                (rejected ? ", wrong power refused" : ", wrong power accepted"));

  auto& ft = rep.table("formal_series", {"n", "terms", "slope"});
  const auto sr = doubles(c["series_radii"]);
  const double gain = c["series_gain"];
  double worst_gain = INFINITY;
  for (int n : dims) {
    HarmonicDensity a0{n, 4, {}};
    a0.coeffs.assign(a0.size(), 0);
    for (size_t k = 0; k < a0.size(); ++k) a0.coeffs[k] = cplx(1.0 / (1 + k), 0.3);
    std::vector<double> slopes;
    for (int J = 0; J <= int(c["series_terms"]); ++J) {
      auto s = build_formal_series(a0, lambda, J);
      std::vector<double> res;
      for (double R : sr) {
        Vec3 x = unit_vec(n, 0.4, 0.3);
        for (auto& v : x) v *= R;
        res.push_back(std::abs(helmholtz_residual_fd(s, n, lambda, x)));
      }
      slopes.push_back(fit_loglog(sr, res).slope);
      ft.add({n, J, slopes.back()});
      if (J) worst_gain = std::min(worst_gain, slopes[J - 1] - slopes[J]);
    }
  }
  rep.metrics["series_worst_gain"] = worst_gain;
  rep.check("formal_series_gain", worst_gain >= gain, "smallest slope gain per term " + fmt(worst_gain));
  return rep;
}

// ---- threshold ------------------------------------------------------------------------

inline std::vector<Field> threshold_schema() {
  return {{"n", 2, integer(2, 3)},
          {"lambda", 1.0, number(0, 10, true)},
          {"orders", {0.0, -0.5, -0.75}, list(number(-3, 1), 1, 12)},
          {"radii", {25, 50, 100, 200, 400}, list(number(1, 5000), 3, 12)},
          {"exponent_tolerance", 0.05, number(0, 1, true)},
          {"log_fit_r2", 0.99, number(0, 1)},
          {"bounded_ratio", 1.05, number(1, 10)}};
}

inline const char* regime_name(ThresholdRegime r) {
  switch (r) {
    case ThresholdRegime::above: return "growth";
    case ThresholdRegime::at: return "log";
    default: return "bounded";
  }
}

inline RunReport run_threshold(const ojson& c, unsigned) {
  RunReport rep;
  const int n = c["n"];
  auto radii = doubles(c["radii"]);
  std::sort(radii.begin(), radii.end());
  auto rows = threshold_scan(SphereDensity::constant(n, 1.0), c["lambda"], doubles(c["orders"]), radii);
  // boundedness compares the largest radius with the one nearest R_max / 4
  size_t q = 0;
  for (size_t k = 0; k < radii.size(); ++k)
    if (std::abs(std::log(radii[k] * 4 / radii.back())) < std::abs(std::log(radii[q] * 4 / radii.back()))) q = k;
  std::vector<std::string> cols{"order", "regime", "exponent", "expected_exponent", "log_fit_r2", "bounded_ratio"};
  for (double R : radii) cols.push_back("mass_R" + format_double(R));
  auto& tab = rep.table("threshold", cols);
  const double etol = c["exponent_tolerance"], r2min = c["log_fit_r2"], bmax = c["bounded_ratio"];
  for (auto& row : rows) {
    const double ratio = row.mass.back() / row.mass[q];
    std::vector<ojson> r{row.r, regime_name(row.regime), row.exponent, 2 * row.r + 1, row.log_fit_r2, ratio};
    for (double m : row.mass) r.push_back(m);
    tab.add(std::move(r));
    const std::string name = "order_" + format_double(row.r);
    if (row.regime == ThresholdRegime::above)
      rep.check(name, std::abs(row.exponent - (2 * row.r + 1)) <= etol,
                "growth exponent " + fmt(row.exponent) + " vs " + fmt(2 * row.r + 1));
    else if (row.regime == ThresholdRegime::at)
      rep.check(name, row.log_fit_r2 > r2min, "mass vs log R fit R^2 " + std::to_string(row.log_fit_r2));
    else
      rep.check(name, ratio < bmax, "M(" + fmt(radii.back()) + ")/M(" + fmt(radii[q]) + ") = " + fmt(ratio));
  }
  return rep;
}

// ---- pairing --------------------------------------------------------------------------

inline std::vector<Field> pairing_schema() {
  return {{"lambda", 1.0, number(0, 10, true)},
          {"radii", {100, 200, 400}, list(number(10, 2000), 2, 10)},
          {"series_terms", 2, integer(0, 4)},
          {"gap_tolerance", 0.1, number(0, 1, true)},
          {"self_pairing_tolerance", 1e-6, number(0, 1, true)}};
}

inline RunReport run_pairing(const ojson& c, unsigned) {
  RunReport rep;
  const double lambda = c["lambda"];
  const auto radii = doubles(c["radii"]);
  HarmonicDensity g{2, 2, {0.1, cplx(0, 0.05), 0.3, 0.0, cplx(0.02, 0.02)}};
  PairingSolution u{smooth_test_density(2), build_formal_series(g, lambda, c["series_terms"], +1)};
  auto& tab = rep.table("pairing", {"R", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "relative_gap"});
  std::vector<double> gaps;
  cplx rhs;
  for (double R : radii) {
    auto p = boundary_pairing_check(u, u, lambda, R);
    tab.add({R, p.lhs.real(), p.lhs.imag(), p.rhs.real(), p.rhs.imag(), p.relative_gap});
    gaps.push_back(p.relative_gap);
    rhs = p.rhs;
  }
  bool decreasing = true;
  for (size_t k = 1; k < gaps.size(); ++k) decreasing = decreasing && gaps[k] < gaps[k - 1];
  const double gtol = c["gap_tolerance"];
  rep.metrics["final_gap"] = gaps.back();
  rep.check("gap_small", gaps.back() < gtol, "relative gap " + fmt(gaps.back()) + " at R = " + fmt(radii.back()));
  rep.check("gap_decreasing", decreasing, "gaps " + fmt(gaps.front()) + " -> " + fmt(gaps.back()));
  // norms of the analytic profiles on a finer sphere rule than the pairing used
  auto prof = u.profile(lambda);
  auto q = SphereQuadrature::make(2, 4 * std::max(64, u.f.degree));
  double np = 0, nm = 0;
  for (size_t k = 0; k < q.size(); ++k) {
    np += q.weights[k] * std::norm(prof.f_plus(q.nodes[k]));
    nm += q.weights[k] * std::norm(prof.f_minus(q.nodes[k]));
  }
  const cplx want = 2.0 * I * lambda * (np - nm);
  const double err = std::abs(rhs - want) / std::abs(want);
  rep.metrics["self_pairing_rhs_error"] = err;
  rep.check("self_pairing_rhs", err < double(c["self_pairing_tolerance"]),
            "rhs vs 2 i lambda (|f+|^2 - |f-|^2): relative error " + fmt(err));
  return rep;
}

// ---- scatter1d ------------------------------------------------------------------------

inline std::vector<Field> scatter1d_schema() {
  return {{"potential", "square", choice({"free", "square", "bumps", "gaussian"})},
          {"height", 2.0, number(-100, 100)},
          {"width", 1.5, number(0, 50, true)},
          {"bumps", 3, integer(1, 20)},
          {"lambdas", {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}, list(number(0, 1e3, true), 1, 200)},
          {"tolerance", 1e-12, number(1e-14, 1e-6)},
          {"unitarity_tolerance", 1e-6, number(0, 1, true)},
          {"drift_tolerance", 1e-8, number(0, 1, true)},
          {"oracle_tolerance", 1e-6, number(0, 1, true)},
          {"lg_orders", {2, 3, 4, 5, 6}, list(integer(1, 12), 1, 12)},
          {"boundary_radii", {50, 100, 200}, list(number(10, 1000), 2, 10)},
          {"boundary_floor", 1.0, number(0, 100)},
          {"boundary_variation", 0.5, number(0, 10)}};
}

inline Potential1D potential_from(const ojson& c, unsigned seed) {
  const std::string name = c["potential"];
  const double h = c["height"], w = c["width"];
  if (name == "free") return Potential1D::zero();
  if (name == "square") return Potential1D::square_barrier(h, w);
  if (name == "bumps") return random_bump_potential(seed, c["bumps"], 2 * w);
  return Potential1D::from_function([h, w](double x) { return h * std::exp(-x * x / (w * w)); });
}

inline RunReport run_scatter1d(const ojson& c, unsigned seed) {
  RunReport rep;
  auto V = potential_from(c, seed);
  const bool square = c["potential"] == "square";
  ScatterOptions opt;
  opt.tol = c["tolerance"];
  auto& tab = rep.table("coefficients", {"lambda", "r_re", "r_im", "t_re", "t_im", "unitarity_defect", "wronskian_drift",
                                         "oracle_error"});
  double defect = 0, drift = 0, oracle = 0;
  for (double l : doubles(c["lambdas"])) {
    auto s = solve_scatter(V, l, opt);
    double d = wronskian_drift(s.path), o = NAN;
    if (square) {
      auto [r, t] = square_barrier_matching(c["height"], c["width"], l);
      o = std::max(std::abs(s.r - r), std::abs(s.t - t));
      oracle = std::max(oracle, o);
    }
    defect = std::max(defect, s.unitarity_defect);
    drift = std::max(drift, d);
    tab.add({l, s.r.real(), s.r.imag(), s.t.real(), s.t.imag(), s.unitarity_defect, d, o});
  }
  rep.metrics["support_radius"] = V.support_radius;
  rep.metrics["max_unitarity_defect"] = defect;
  rep.metrics["max_wronskian_drift"] = drift;
  rep.check("unitarity", defect < double(c["unitarity_tolerance"]), "max ||r|^2 + |t|^2 - 1| " + fmt(defect));
  rep.check("wronskian_drift", drift < double(c["drift_tolerance"]), "max drift " + fmt(drift));
  if (square) {
    rep.metrics["max_oracle_error"] = oracle;
    rep.check("barrier_oracle", oracle < double(c["oracle_tolerance"]), "max |(r,t) - matching| " + fmt(oracle));
  } else {
    rep.skip("barrier_oracle", "closed-form oracle exists only for the square barrier");
  }

  // Liouville-Green profiles of D_x^2 - x^k: L^2 exactly when k > 2
  auto& lg = rep.table("lg_profiles", {"k", "eps", "side", "oscillatory", "residual_slope", "square_integrable", "tail_mass"});
  bool dichotomy = true, decay = true;
  for (int k : c["lg_orders"].get<std::vector<int>>())
    for (int eps : {-1, 1}) {
      auto r = lg_profile_residual(k, eps, 1.0);
      lg.add({k, eps, r.side, r.oscillatory, r.fit.slope, r.square_integrable, r.tail_mass});
      decay = decay && r.fit.slope <= -0.9;
      if (eps == -1) dichotomy = dichotomy && r.square_integrable == (k > 2);
    }
  rep.check("lg_l2_dichotomy", dichotomy, "oscillatory profiles of D_x^2 - x^k are L^2 near infinity exactly for k > 2");
  rep.check("lg_residual_decay", decay, "relative residual decays at least like |x|^{-0.9} for every k and sign");

  auto& bt = rep.table("boundary_term", {"R", "re", "im", "abs"});
  std::vector<double> mags;
  for (double R : doubles(c["boundary_radii"])) {
    cplx b = symmetry_boundary_term(lg_cubic_profile(), R);
    mags.push_back(std::abs(b));
    bt.add({R, b.real(), b.imag(), std::abs(b)});
  }
  double lo = *std::min_element(mags.begin(), mags.end()), hi = max_of(mags);
  rep.metrics["boundary_term_min"] = lo;
  rep.check("boundary_term_nonvanishing", lo > double(c["boundary_floor"]) && (hi - lo) / lo < double(c["boundary_variation"]),
            "|B(R)| in [" + fmt(lo) + ", " + fmt(hi) + "] for D_x^2 + x^3");
  return rep;
}

// ---- radon ----------------------------------------------------------------------------

inline std::vector<Field> radon_schema() {
  return {{"adjoint_pairs", 20, integer(1, 200)},
          {"adjoint_box", 7.0, number(4, 20)},
          {"adjoint_nodes", 40, integer(8, 200)},
          {"adjoint_tolerance", 1e-6, number(0, 1, true)},
          {"symbol_points", 31, integer(8, 200)},
          {"plateau_tolerance", 0.05, number(0, 1, true)},
          {"cone_width", 0.3, number(0, 1, true)},
          {"collapse_ratio", 1e-3, number(0, 1, true)},
          {"injectivity_N", 24, integer(4, 40)},
          {"injectivity_half", 1.5, number(0, 10, true)},
          {"injectivity_N3", 10, integer(4, 12)},
          {"injectivity_half3", 1.0, number(0, 10, true)},
          {"reconstruction_tolerance", 1e-3, number(0, 1, true)}};
}

inline RunReport run_radon(const ojson& c, unsigned seed) {
  RunReport rep;
  auto phi = LocalizerProfile::standard();
  auto dirs = DirectionSet::standard(2);

  // <I f, v> = <f, L v> on random Gaussian pairs, tensor Gauss-Legendre on a box
  const double box = c["adjoint_box"];
  auto gl = gauss_legendre(c["adjoint_nodes"]);
  auto integrate = [&](auto&& f) {
    double s = 0;
    for (size_t i = 0; i < gl.nodes.size(); ++i)
      for (size_t j = 0; j < gl.nodes.size(); ++j) s += gl.weights[i] * gl.weights[j] * f(Vec3{box * gl.nodes[i], box * gl.nodes[j], 0});
    return s * box * box;
  };
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  double adj = 0;
  for (int t = 0; t < int(c["adjoint_pairs"]); ++t) {
    Vec3 a{u(rng), u(rng), 0}, b{u(rng), u(rng), 0};
    double tilt = u(rng);
    auto f = [a](const Vec3& x) { return std::exp(-((x[0] - a[0]) * (x[0] - a[0]) + (x[1] - a[1]) * (x[1] - a[1]))); };
    auto v = [b, tilt, &dirs](const Vec3& z, size_t k) {
      return std::exp(-((z[0] - b[0]) * (z[0] - b[0]) + (z[1] - b[1]) * (z[1] - b[1]))) * (1 + tilt * dirs.nodes[k][0]);
    };
    double lhs = 0;
    for (size_t k = 0; k < dirs.size(); ++k)
      lhs += dirs.weights[k] * integrate([&](const Vec3& z) { return xray_transform(f, z, dirs.nodes[k], phi, 2) * v(z, k); });
    auto Lv = backproject(v, dirs, phi);
    double rhs = integrate([&](const Vec3& y) { return f(y) * Lv(y); });
    adj = std::max(adj, std::abs(lhs - rhs) / std::abs(rhs));
  }
  rep.metrics["adjoint_gap"] = adj;
  rep.check("adjointness", adj < double(c["adjoint_tolerance"]), "max relative gap " + fmt(adj));

  // normal-operator symbol
  std::vector<double> grid;
  const int m = c["symbol_points"];
  for (int i = 0; i < m; ++i) grid.push_back(0.1 * std::pow(1000.0, double(i) / (m - 1)));
  auto& st = rep.table("kernel_symbol", {"n", "xi", "value", "scaled"});
  bool sym_ok = true;
  std::string sym_detail;
  for (int n : {2, 3}) {
    auto tab = normal_kernel_symbol(n, phi, grid);
    for (size_t i = 0; i < tab.xi.size(); ++i) st.add({n, tab.xi[i], tab.value[i], tab.value[i] * tab.xi[i]});
    sym_ok = sym_ok && tab.positive && tab.plateau_variation < double(c["plateau_tolerance"]);
    sym_detail += "n=" + std::to_string(n) + ": plateau " + fmt(tab.plateau_c) + " variation " + fmt(tab.plateau_variation) +
                  (tab.positive ? " positive; " : " NOT positive; ");
    rep.metrics["plateau_variation_n" + std::to_string(n)] = tab.plateau_variation;
  }
  rep.check("kernel_symbol_elliptic", sym_ok, sym_detail.substr(0, sym_detail.size() - 2));

  // cone restriction: n = 3 stays elliptic, n = 2 collapses
  auto chi = ConeCutoff::bump(c["cone_width"]);
  auto r3 = cone_ellipticity_check(3, chi, phi), r2 = cone_ellipticity_check(2, chi, phi);
  rep.metrics["cone_floor_n3"] = r3.relative_floor;
  rep.metrics["cone_floor_n2"] = r2.relative_floor;
  auto& ct = rep.table("cone", {"n", "xi_hat_1", "scaled_symbol"});
  for (auto* r : {&r2, &r3})
    for (size_t j = 0; j < r->direction_w1.size(); ++j) ct.add({r->n, r->direction_w1[j], r->scaled.back()[j]});
  const double collapse = c["collapse_ratio"];
  rep.check("cone_dichotomy", r3.elliptic && r3.floor > 0 && r2.floor < collapse * r2.full_floor,
            "relative floors n=3 " + fmt(r3.relative_floor) + ", n=2 " + fmt(r2.relative_floor));

  // injectivity on a finite unknown grid
  auto& it = rep.table("injectivity", {"n", "N", "unknowns", "directions", "sigma_min", "sigma_max", "sigma_stability",
                                       "reconstruction_error"});
  bool inj = true;
  std::string inj_detail;
  InjectivityOptions o2;
  o2.N = c["injectivity_N"];
  o2.half = c["injectivity_half"];
  InjectivityOptions o3;
  o3.n = 3;
  o3.N = c["injectivity_N3"];
  o3.half = c["injectivity_half3"];
  o3.chi = chi;
  for (auto* o : {&o2, &o3}) {
    auto r = injectivity_probe(*o);
    it.add({r.n, r.N, r.unknowns, r.directions, r.sigma_min, r.sigma_max, r.sigma_stability, r.reconstruction_error});
    inj = inj && !r.singular && r.sigma_min > 0 && r.reconstruction_error < double(c["reconstruction_tolerance"]);
    inj_detail += "n=" + std::to_string(r.n) + ": sigma_min " + fmt(r.sigma_min) + ", reconstruction " +
                  fmt(r.reconstruction_error) + "; ";
  }
  rep.check("injectivity", inj, inj_detail.substr(0, inj_detail.size() - 2));
  return rep;
}

// ---- var-order ------------------------------------------------------------------------

inline std::vector<Field> var_order_schema() {
  return {schema::grid("grid", 1, 20.0, 256, 1),
          {"orders", {0.0, 1.0, -0.5}, list(number(-4, 4), 1, 10)},
          {"weight_order", -1.0, number(-4, 4)},
          {"seminorm_order", 2, integer(1, 4)},
          {"loss_coefficient", 0.1, number(0, 1, true)},
          {"consistency_tolerance", 1e-6, number(0, 1, true)}};
}

inline RunReport run_var_order(const ojson& c, unsigned) {
  RunReport rep;
  // <x>^{o(xi)} with o = -c xi^2/<xi>^2: bounded, but xi-derivatives carry log<x>
  const double cl = c["loss_coefficient"];
  auto a = make_symbol(1, [cl](const Vec3& x, const Vec3& k) {
    return cplx(std::pow(jp(x[0]), -cl * k[0] * k[0] / (1 + k[0] * k[0])));
  }, 0, 0);
  auto r0 = conormal_seminorm(a, 0), rk = conormal_seminorm(a, c["seminorm_order"]);
  rep.metrics["log_growth"] = rk.log_growth;
  rep.metrics["seminorm_order0"] = r0.value;
  rep.check("log_loss_flagged", r0.in_class && !rk.in_class && rk.log_growth > 0,
            "order-0 seminorm " + fmt(r0.value) + (rk.in_class ? ", derivatives in class" : ", derivatives flagged") +
                " with log growth " + fmt(rk.log_growth));

  auto g = grid_from(c["grid"]);
  auto u = GridField::sample(g, [](const Vec3& x) { return std::polar(std::exp(-x[0] * x[0] / 4), 1.5 * x[0]); });
  const double r = c["weight_order"];
  auto& tab = rep.table("consistency", {"s", "r", "variable", "constant", "relative_difference"});
  double worst = 0;
  for (double s : doubles(c["orders"])) {
    SobolevOrder ord;
    ord.s = s;
    ord.variable_r = [r](const Vec3&, const Vec3&) { return r; };
    double v = var_sobolev_norm(u, ord), ref = sobolev_norm(u, s, r);
    double d = std::abs(v - ref) / ref;
    worst = std::max(worst, d);
    tab.add({s, r, v, ref, d});
  }
  rep.metrics["consistency_error"] = worst;
  rep.check("constant_order_consistency", worst < double(c["consistency_tolerance"]), "max relative difference " + fmt(worst));
  return rep;
}

// ---- registry and dispatch -------------------------------------------------------------

struct Experiment {
  std::string name;
  std::string summary;
  std::vector<Field> (*schema)();
  RunReport (*run)(const ojson&, unsigned);
};

inline const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> r{
      {"flow", "Helmholtz boundary trajectories approach the outgoing radial set", flow_schema, run_flow},
      {"radial", "radial sets, source/sink verdicts and threshold quantities", radial_schema, run_radial},
      {"quantize-check", "quantization, composition, commutators and the parametrix", quantize_schema, run_quantize},
      {"commutant", "model estimate and commutant identities", commutant_schema, run_commutant},
      {"helmholtz", "stationary phase, free scattering matrix and formal series", helmholtz_schema, run_helmholtz},
      {"threshold", "truncated weighted masses across the threshold order", threshold_schema, run_threshold},
      {"pairing", "boundary pairing against asymptotic data", pairing_schema, run_pairing},
      {"scatter1d", "one-dimensional scattering and Liouville-Green profiles", scatter1d_schema, run_scatter1d},
      {"radon", "localized X-ray transform, normal symbol, cone ellipticity, injectivity", radon_schema, run_radon},
      {"var-order", "variable-order symbols and Sobolev norms", var_order_schema, run_var_order}};
  return r;
}

inline const Experiment& find_experiment(const std::string& name) {
  for (auto& e : registry())
    if (e.name == name) return e;
  std::string msg = "unknown experiment \"" + name + "\"";
  std::vector<Field> names;
  for (auto& e : registry()) names.push_back({e.name, nullptr, nullptr});
  if (auto s = closest_key(name, names)) msg += " (did you mean \"" + *s + "\"?)";
  throw ConfigError(msg);
}

inline std::vector<Field> full_schema(const Experiment& e) {
  std::vector<Field> f{{"experiment", e.name, text()},
                       {"seed", 2024, integer(0, 4294967295L)},
                       {"output_dir", "out", text()},
                       {"format", "json", choice({"json", "csv"})}};
  auto s = e.schema();
  f.insert(f.end(), s.begin(), s.end());
  return f;
}

// Validated config with every default filled in; throws ConfigError listing all violations.
inline ojson validate_config(const std::string& experiment, const ojson& raw) {
  const auto& e = find_experiment(experiment);
  std::vector<std::string> errors;
  ojson cfg = apply_schema(raw, full_schema(e), "", errors);
  if (cfg.contains("experiment") && cfg["experiment"].is_string() && cfg["experiment"] != experiment)
    errors.push_back("experiment: config names \"" + cfg["experiment"].get<std::string>() + "\" but \"" + experiment +
                     "\" was requested");
  if (!errors.empty()) throw ConfigError("invalid configuration:" + join_errors(errors));
  return cfg;
}

inline ojson load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  try {
    return ojson::parse(in);
  } catch (const ojson::parse_error& ex) {
    throw ConfigError("config " + path + " is not valid JSON: " + ex.what());
  }
}

// Runs a validated config. Module failures come back as ExperimentError with context.
inline RunReport run_experiment(const ojson& cfg, bool timing = false) {
  const auto& e = find_experiment(cfg["experiment"]);
  auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  try {
    rep = e.run(cfg, cfg["seed"].get<unsigned>());
  } catch (const ConfigError& ex) {
    throw ConfigError("experiment " + e.name + ": " + ex.what());
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ExperimentError("experiment " + e.name + ": " + ex.what());
  }
  rep.experiment = e.name;
  // where the report lands is not part of the experiment, so the echo omits it
  rep.parameters = cfg;
  rep.parameters.erase("output_dir");
  if (timing) rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace scatcalc::experiments

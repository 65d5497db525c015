#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/assembly.hpp"
#include "liouville/coupling.hpp"
#include "liouville/criteria.hpp"
#include "liouville/errors.hpp"
#include "liouville/fredholm.hpp"
#include "liouville/json_io.hpp"
#include "liouville/linearized.hpp"
#include "liouville/radial_bubble.hpp"
#include "liouville/torus.hpp"

using namespace liouville;

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tol;
  std::vector<double> eps_list;
  int l = 1;
  bool check = false;
  bool grid_check = false;
};

struct Outcome {
  Json report;
  std::string csv;
  bool pass = true;
};

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t k = 0; k < header.size(); ++k) os_ << (k ? "," : "") << header[k];
    os_ << '\n';
  }
  void row(const std::vector<double>& v) {
    char buf[32];
    for (std::size_t k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", v[k]);
      os_ << (k ? "," : "") << buf;
    }
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

RunConfig config_for(const Flags& f, bool required = true) {
  RunConfig c;
  if (!f.config.empty()) {
    c = load_config(f.config);
  } else if (required) {
    throw ConfigurationError("--config is required");
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.tol) c.tol = *f.tol;
  if (!f.eps_list.empty()) c.eps_list = f.eps_list;
  return c;
}

std::vector<double> eps_or(const RunConfig& c, std::vector<double> fallback) {
  return c.eps_list.empty() ? fallback : c.eps_list;
}

Eigen::VectorXd require(const Eigen::VectorXd& v, const char* key) {
  if (v.size() == 0) throw ConfigurationError(std::string("config: ") + key + ": required");
  return v;
}

// Solves from alpha when no mass target is given, otherwise matches sigma.
RadialBubble bubble_for(const RunConfig& c, bool prefer_alpha) {
  if (prefer_alpha && c.alpha.size() > 0) return solve_radial(c.A, c.alpha, c.R, c.tol);
  if (c.sigma.size() == 0) {
    if (c.alpha.size() > 0) return solve_radial(c.A, c.alpha, c.R, c.tol);
    throw ConfigurationError("config: needs sigma, rho, rho_ray or alpha");
  }
  MatchOptions mo;
  mo.tol = c.tol;
  const Eigen::VectorXd seed = c.alpha.size() > 0 ? c.alpha : Eigen::VectorXd::Zero(c.n());
  return match_sigma(c.A, c.sigma, seed, mo);
}

Json bubble_json(const RadialBubble& b) {
  Json j;
  j["alpha"] = to_json(b.alpha);
  j["sigma"] = to_json(b.sigma);
  j["m"] = to_json(b.m);
  j["I"] = to_json(b.I);
  j["R"] = b.R;
  j["residuals"] = {{"ode", b.ode_residual}, {"pohozaev", b.pohozaev_residual}};
  if (b.sigma_err.size() > 0) j["residuals"]["sigma_error"] = to_json(b.sigma_err);
  return j;
}

std::string bubble_csv(const RadialBubble& b) {
  std::vector<std::string> head{"r"};
  for (int i = 0; i < b.n(); ++i) {
    head.push_back("v" + std::to_string(i + 1));
    head.push_back("dv" + std::to_string(i + 1));
  }
  Csv csv(head);
  for (int k = 0; k < b.nodes(); k += 10) {
    const double r = b.r_node(k);
    std::vector<double> row{r};
    for (int i = 0; i < b.n(); ++i) {
      row.push_back(b.v(i, r));
      row.push_back(b.dv(i, r));
    }
    csv.row(row);
  }
  return csv.str();
}

// Local weight data at q_1, normalised to H(0) = 1; the "local" config block overrides it.
HLocalData local_data(const TorusGreen& g, const RunConfig& c, const Eigen::VectorXd& m) {
  HLocalData h = HLocalData::constant(c.n());
  if (!c.points.q.empty()) {
    h = local_weight(g, c.points, c.h, m, 0);
    h.value.setOnes();
  }
  if (!c.local_grad.empty()) h.grad = c.local_grad;
  if (!c.local_hess.empty()) h.hess = c.local_hess;
  return h;
}

Json local_json(const HLocalData& h) {
  Json j = Json::array();
  for (int i = 0; i < h.n(); ++i) {
    Eigen::MatrixXd hs = h.hess[i];
    j.push_back({{"grad", to_json(h.grad[i])}, {"hess", to_json(hs)}});
  }
  return j;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double max_over_min(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

Outcome bubble_solve(const Flags& f) {
  RunConfig c = config_for(f);
  require(c.alpha, "alpha");
  const RadialBubble b = solve_radial(c.A, c.alpha, c.R, c.tol);
  Outcome o;
  o.report = bubble_json(b);
  o.pass = b.pohozaev_residual <= 1e-6;
  o.csv = bubble_csv(b);
  return o;
}

Outcome bubble_match(const Flags& f) {
  RunConfig c = config_for(f);
  require(c.sigma, "sigma");
  const RadialBubble b = bubble_for(c, false);
  Outcome o;
  o.report = bubble_json(b);
  o.report["sigma_target"] = to_json(c.sigma);
  const double err = (b.sigma - c.sigma).cwiseAbs().maxCoeff();
  o.report["sigma_mismatch"] = err;
  o.pass = err <= 10 * c.tol * std::max(1.0, c.sigma.cwiseAbs().maxCoeff());
  o.csv = bubble_csv(b);
  return o;
}

Outcome gamma_project_cmd(const Flags& f) {
  RunConfig c = config_for(f);
  require(c.rho_ray, "rho_ray");
  const ParamVector p = gamma_project(c.A, c.rho_ray, c.N);
  const MassData md = m_star(c.A, p);
  const HypothesisReport hr = check_hypotheses(c.A);
  const double lam = lambda_in(c.A, p);
  Outcome o;
  o.report["rho"] = to_json(p.rho);
  o.report["N"] = p.N;
  o.report["lambda"] = lam;
  o.report["sigma"] = to_json(md.sigma);
  o.report["m"] = to_json(md.m);
  o.report["m_star"] = md.m_star;
  o.report["non_integrable"] = md.non_integrable;
  o.report["hypotheses_usable"] = hr.usable();
  o.pass = std::abs(lam) <= 1e-10 * std::max(1.0, p.rho.cwiseAbs().maxCoeff());
  return o;
}

Outcome torus_green(const Flags& f) {
  RunConfig c = config_for(f, false);
  const TorusGreen g;
  Outcome o;
  o.report["robin"] = g.robin();
  o.report["split"] = g.split();
  if (c.points.N() > 0) {
    Json pts = Json::array();
    for (int t = 0; t < c.points.N(); ++t) {
      Json e;
      e["q"] = to_json(c.points.q[t]);
      e["g_star"] = g_star(g, c.points.q[t], c.points, t);
      e["grad_g_star"] = to_json(grad_1_g_star(g, c.points.q[t], c.points, t));
      pts.push_back(e);
    }
    o.report["points"] = pts;
  }
  if (!f.check) return o;

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(0, 1);
  Csv csv({"x1", "x2", "q1", "q2", "ewald", "fourier"});
  double fourier = 0;
  for (int k = 0; k < 100;) {
    const Vec2 x(u(rng), u(rng)), q(u(rng), u(rng));
    if (torus_distance(x, q) < 0.05) continue;
    const double a = g.green(x, q), b = green_fourier(x - q);
    fourier = std::max(fourier, std::abs(a - b));
    csv.row({x[0], x[1], q[0], q[1], a, b});
    ++k;
  }
  double mean = 0, robin = 0;
  for (int k = 0; k < 50; ++k) {
    const Vec2 q(u(rng), u(rng));
    robin = std::max(robin, std::abs(g.regular_part(q, q) - g.robin()));
    if (k < 5) mean = std::max(mean, std::abs(green_mean(g, q)));
  }
  const TorusGreen wide(4 * g.split()), narrow(g.split() / 4);
  const Vec2 x(0.3, 0.1), q(0.05, 0.7);
  double split = std::max(std::abs(wide.green(x, q) - g.green(x, q)), std::abs(narrow.green(x, q) - g.green(x, q)));
  split = std::max({split, std::abs(wide.robin() - g.robin()), std::abs(narrow.robin() - g.robin())});
  o.report["check"] = {{"ewald_vs_fourier", fourier}, {"mean", mean}, {"robin_spread", robin}, {"split_change", split}};
  o.pass = fourier <= 1e-8 && mean <= 1e-10 && robin <= 1e-12 && split <= 1e-9;
  o.csv = csv.str();
  return o;
}

Outcome critical_find(const Flags& f) {
  RunConfig c = config_for(f);
  require(c.rho, "rho");
  if (c.points.N() == 0) throw ConfigurationError("config: points: required");
  const TorusGreen g;
  const Eigen::VectorXd m = m_star(c.A, {c.rho, c.N}).m;
  CriticalOptions co;
  co.seed = c.seed;
  const CriticalResult r = find_critical(g, c.points, c.rho, m, c.h, co);
  const FValue fv = f_functional(g, r.config, c.rho, m, c.h);
  Outcome o;
  Json pts = Json::array();
  for (const Vec2& q : r.config.q) pts.push_back(to_json(q));
  o.report["points"] = pts;
  o.report["f"] = fv.value;
  o.report["grad_norm"] = r.grad_norm;
  o.report["hessian_eigenvalues"] = to_json(r.eigenvalues);
  o.report["nondegenerate"] = r.nondegenerate;
  o.report["iterations"] = r.iterations;
  o.report["start_used"] = r.start_used;
  o.pass = r.grad_norm <= 1e-10;
  return o;
}

Json criteria_json(const CriteriaReport& r) {
  Json j;
  j["H"] = to_json(r.H);
  j["D"] = to_json(r.D);
  j["L"] = to_json(r.L);
  j["m"] = to_json(r.m);
  j["m_star"] = r.m_star;
  j["S_D"] = r.S_D;
  j["S_L"] = r.S_L;
  j["S_D_hat"] = r.S_D_hat;
  j["S_L_hat"] = r.S_L_hat;
  j["regime"] = regime_name(r.regime);
  j["cells"] = r.cells;
  Json tr = Json::array();
  for (std::size_t i = 0; i < r.traces.size(); ++i)
    for (std::size_t t = 0; t < r.traces[i].size(); ++t) {
      const DTrace& d = r.traces[i][t];
      tr.push_back({{"i", i + 1},
                    {"t", t + 1},
                    {"spread", d.spread},
                    {"exponent", d.exponent},
                    {"log_corrected", d.log_corrected},
                    {"extrapolated", d.extrapolated}});
    }
  j["traces"] = tr;
  return j;
}

struct CriteriaSetup {
  TorusGreen g;
  RadialBubble bubble;
  CriteriaReport report;
};

std::unique_ptr<CriteriaSetup> criteria_setup(const RunConfig& c) {
  if (c.points.N() == 0) throw ConfigurationError("config: points: required");
  auto s = std::make_unique<CriteriaSetup>();
  s->bubble = bubble_for(c, false);
  s->report = criteria_report(s->g, c.points, c.h, s->bubble.I, s->bubble.m, c.tau_fractions);
  return s;
}

Outcome criteria_report_cmd(const Flags& f) {
  const RunConfig c = config_for(f);
  const auto s = criteria_setup(c);
  Outcome o;
  o.report = criteria_json(s->report);
  o.report["I"] = to_json(s->bubble.I);
  o.report["tau_fractions"] = c.tau_fractions;
  if (!c.eps_list.empty()) {
    const EpsilonRatios er = epsilon_ratios(s->report.H, s->report.m, c.eps_list.front());
    o.report["epsilon_ratios"] = {{"eps", er.eps}, {"inconsistency", er.inconsistency}, {"warning", er.warning}};
  }
  Csv csv({"i", "t", "tau", "F", "corrected"});
  for (std::size_t i = 0; i < s->report.traces.size(); ++i)
    for (std::size_t t = 0; t < s->report.traces[i].size(); ++t) {
      const DTrace& d = s->report.traces[i][t];
      for (std::size_t k = 0; k < d.tau.size(); ++k)
        csv.row({double(i + 1), double(t + 1), d.tau[k], d.F[k], d.corrected[k]});
    }
  o.csv = csv.str();
  return o;
}

Outcome verify_expansion(const Flags& f) {
  const RunConfig c = config_for(f);
  const RadialBubble b = bubble_for(c, true);
  const ExpansionReport e = verify_expansions(b);
  Outcome o;
  o.report["bubble"] = bubble_json(b);
  o.report["r2_fit"] = to_json(e.r2_fit);
  o.report["r2_pred"] = to_json(e.r2_pred);
  o.report["r4_fit"] = to_json(e.r4_fit);
  o.report["r4_pred_64"] = to_json(e.r4_pred64);
  o.report["r4_pred_196"] = to_json(e.r4_pred196);
  o.report["r4_match"] = e.r4_match;
  o.report["large_fit"] = to_json(e.large_fit);
  o.report["large_pred"] = to_json(e.large_pred);
  o.report["warnings"] = e.warnings;
  bool pass = true;
  for (int i = 0; i < b.n(); ++i) {
    pass = pass && std::abs(e.r2_fit[i] - e.r2_pred[i]) <= 1e-3 * std::abs(e.r2_pred[i]);
    pass = pass && e.r4_match[i] != "neither";
    for (int j = 0; j < b.n(); ++j) {
      if (std::isnan(e.large_pred(i, j))) continue;
      pass = pass && std::abs(e.large_fit(i, j) - e.large_pred(i, j)) <= 1e-2 * std::abs(e.large_pred(i, j));
    }
  }
  o.pass = pass;
  return o;
}

Outcome verify_kernels(const Flags& f) {
  const RunConfig c = config_for(f);
  const RadialBubble b = bubble_for(c, true);
  const auto k = kernel_fields(b);
  const double bound = 5 * std::pow(b.R, 2 - b.m.minCoeff());
  Outcome o;
  o.report["bubble"] = bubble_json(b);
  o.report["ode_residual"] = {k[0].ode_residual, k[1].ode_residual, k[2].ode_residual};
  o.report["far_field_error"] = to_json(k[0].far_field_error);
  o.report["far_field_bound"] = bound;
  o.pass = k[0].ode_residual <= 10 * c.tol && k[1].ode_residual <= 10 * c.tol &&
           k[0].far_field_error.maxCoeff() <= bound;
  return o;
}

Outcome verify_frequency(const Flags& f) {
  const RunConfig c = config_for(f);
  if (f.l < 0 || f.l > 2) throw ConfigurationError("--l must be 0, 1 or 2");
  const TorusGreen g;
  const RadialBubble b = bubble_for(c, false);
  const HLocalData h = local_data(g, c, b.m);
  const std::vector<double> eps = eps_or(c, {1e-2, 1e-3, 1e-4});
  Outcome o;
  o.report["l"] = f.l;
  o.report["local"] = local_json(h);
  Csv csv({"eps", "sup_ratio", "sup_abs", "refinement_change", "projected"});
  std::vector<double> ratios;
  Json rows = Json::array();
  bool converged = true;
  for (double e : eps) {
    FrequencyOptions fo;
    fo.projection = FrequencyOptions::Projection::Always;
    const CorrectionProfile gx = solve_frequency(b, 1, first_order_source(b, h, e, 0), 1 / e, fo);
    CorrectionProfile p = gx;
    if (f.l != 1) {
      const CorrectionProfile gy = solve_frequency(b, 1, first_order_source(b, h, e, 1), 1 / e, fo);
      const SecondOrderSources src = second_order_source(b, h, e, gx, gy);
      FrequencyOptions f2;
      p = solve_frequency(b, f.l, f.l == 0 ? src.l0 : src.l2_cos, 1 / e, f2);
    }
    const double sup = p.g.cwiseAbs().maxCoeff();
    const double ratio = f.l == 1 ? p.sup_ratio(e, 0.05) : sup / (e * e * std::log(1 / e));
    ratios.push_back(ratio);
    converged = converged && p.refinement_change <= 1e-3 * std::max(1.0, sup);
    rows.push_back({{"eps", e}, {"ratio", ratio}, {"sup", sup}, {"refinement_change", p.refinement_change},
                    {"projected", p.projected}, {"multiplier", p.multiplier}});
    csv.row({e, ratio, sup, p.refinement_change, p.projected ? 1.0 : 0.0});
  }
  o.report["runs"] = rows;
  o.report["ratio_spread"] = max_over_min(ratios);
  o.pass = converged && (f.l != 1 || max_over_min(ratios) <= 1.5);
  if (f.l == 0 && std::abs(b.m.minCoeff() - 4) < 1e-6) {
    Json bj = Json::array();
    for (double e : eps) {
      const BCoefficient bc = b_coefficient(b, h, e, 1 / e);
      bj.push_back({{"eps", e}, {"b", to_json(bc.b)}, {"ratio", to_json(bc.ratio)}});
    }
    o.report["b_coefficient"] = bj;
  }
  o.csv = csv.str();
  return o;
}

Outcome verify_fredholm(const Flags& f) {
  const RunConfig c = config_for(f);
  const TorusGreen g;
  const RadialBubble b = bubble_for(c, true);
  const HLocalData h = local_data(g, c, b.m);
  const double tau = c.tau > 0 ? c.tau : 0.25;
  const std::vector<double> eps = eps_or(c, {0.1, 0.05, 0.025});
  const auto res = invertibility_check(b, h, eps, tau);
  Outcome o;
  Csv csv({"eps", "sigma_min_constrained", "sigma_min_unconstrained", "t1", "t2"});
  std::vector<double> sc;
  Json rows = Json::array();
  for (const auto& r : res) {
    csv.row({r.eps, r.sigma_min, r.sigma_min_unconstrained, r.t[0], r.t[1]});
    sc.push_back(r.sigma_min);
    rows.push_back({{"eps", r.eps}, {"sigma_min", r.sigma_min}, {"sigma_min_unconstrained", r.sigma_min_unconstrained},
                    {"t", r.t}, {"K", r.K}, {"change", r.change}});
  }
  auto smallest = std::min_element(res.begin(), res.end(), [](auto& a, auto& b) { return a.eps < b.eps; });
  const double idem = projection_idempotency(b, h, smallest->eps, tau, c.seed);
  o.report["tau"] = tau;
  o.report["runs"] = rows;
  o.report["constrained_spread"] = max_over_min(sc);
  o.report["gap_at_smallest_eps"] = smallest->sigma_min / smallest->sigma_min_unconstrained;
  o.report["idempotency"] = idem;
  o.pass = max_over_min(sc) <= 2 && smallest->sigma_min >= 10 * smallest->sigma_min_unconstrained && idem <= 1e-10;
  o.csv = csv.str();
  return o;
}

struct AssemblySetup {
  TorusGreen g;
  BlowupConfig base;
  GreenTable table;
};

std::unique_ptr<AssemblySetup> assembly_setup(const RunConfig& c, const std::vector<double>& eps, int grid) {
  require(c.rho, "rho");
  if (c.points.N() == 0) throw ConfigurationError("config: points: required");
  auto s = std::make_unique<AssemblySetup>();
  s->base = make_config(s->g, c.A, c.rho, c.points, c.h, eps.front(), c.tau, grid, c.alpha);
  s->table = green_table(s->g, c.points, grid, c.threads);
  return s;
}

Outcome verify_matching(const Flags& f) {
  const RunConfig c = config_for(f);
  const std::vector<double> eps = eps_or(c, {0.04, 0.02, 0.01, 0.005});
  const auto s = assembly_setup(c, eps, c.grid);
  Outcome o;
  Csv csv({"eps", "mismatch"});
  std::vector<double> lx, ly;
  Json rows = Json::array();
  for (double e : eps) {
    const BlowupConfig bc = with_eps(s->g, s->base, e);
    const ApproxSolution a = assemble(s->g, bc, &s->table);
    csv.row({e, a.mismatch_sup});
    lx.push_back(std::log(e));
    ly.push_back(std::log(a.mismatch_sup));
    rows.push_back({{"eps", e}, {"mismatch", a.mismatch_sup}, {"mass", to_json(a.mass)}, {"ubar", to_json(a.ubar)}});
  }
  const double slope = ls_slope(lx, ly), target = s->base.m().minCoeff() - 2;
  o.report["runs"] = rows;
  o.report["slope"] = slope;
  o.report["expected_slope"] = target;
  o.report["tau"] = s->base.tau;
  o.report["average_normalization"] = "M = 2 ln(1/eps_t)";
  o.pass = std::abs(slope - target) <= 0.15;
  o.csv = csv.str();
  return o;
}

Outcome verify_residual(const Flags& f) {
  const RunConfig c = config_for(f);
  const std::vector<double> eps = eps_or(c, {0.04, 0.02, 0.01, 0.005});
  const auto s = assembly_setup(c, eps, c.grid);
  Outcome o;
  const int n = c.n();
  std::vector<std::string> head{"eps"};
  for (int i = 0; i < n; ++i) {
    head.push_back("l2_" + std::to_string(i + 1));
    head.push_back("sup_" + std::to_string(i + 1));
  }
  Csv csv(head);
  std::vector<double> sups;
  Json rows = Json::array();
  for (double e : eps) {
    const BlowupConfig bc = with_eps(s->g, s->base, e);
    const ApproxSolution a = assemble(s->g, bc, &s->table);
    const ResidualReport r = residual(bc, a);
    std::vector<double> row{e};
    for (int i = 0; i < n; ++i) {
      row.push_back(r.l2[i]);
      row.push_back(r.sup[i]);
    }
    csv.row(row);
    sups.push_back(r.sup.maxCoeff());
    rows.push_back({{"eps", e}, {"l2", to_json(r.l2)}, {"sup", to_json(r.sup)}, {"tail_fraction", r.tail_fraction},
                    {"mask", r.mask}});
  }
  bool monotone = true;
  for (std::size_t k = 1; k < sups.size(); ++k) monotone = monotone && sups[k] < sups[k - 1];
  o.report["runs"] = rows;
  o.report["monotone"] = monotone;
  o.pass = monotone;
  if (f.grid_check) {
    const BlowupConfig bc = with_eps(s->g, s->base, eps.front());
    const ResidualReport coarse = residual(bc, assemble(s->g, bc, &s->table));
    const auto fine_setup = assembly_setup(c, eps, 2 * c.grid);
    const BlowupConfig fc = with_eps(fine_setup->g, fine_setup->base, eps.front());
    const ResidualReport fine = residual(fc, assemble(fine_setup->g, fc, &fine_setup->table));
    const double change = ((fine.l2 - coarse.l2).cwiseAbs().array() / coarse.l2.cwiseAbs().array()).maxCoeff();
    o.report["grid_doubling_change"] = change;
    o.pass = o.pass && change < 0.05;
  }
  o.csv = csv.str();
  return o;
}

Outcome verify_pohozaev(const Flags& f) {
  const RunConfig c = config_for(f);
  const TorusGreen g;
  auto b = std::make_shared<const RadialBubble>(bubble_for(c, false));
  const HLocalData h = local_data(g, c, b->m);
  const double tau = c.tau > 0 ? c.tau : 0.25;
  Outcome o;
  std::vector<Vec2> beta;
  for (int i = 0; i < c.n(); ++i) beta.push_back(Vec2(0.01 * (i + 1), 0.02 - 0.03 * i));
  const PohozaevResult ex = pohozaev_balance(exact_fields(b, beta), c.A, 20, 0);
  o.report["exact"] = {{"volume", ex.volume}, {"boundary", ex.boundary}, {"imbalance", ex.imbalance},
                       {"quadrature_error", ex.quadrature_error}};
  const bool exact_ok = std::abs(ex.imbalance) <= 10 * ex.quadrature_error;
  Csv csv({"eps", "volume", "boundary", "imbalance", "imbalance_over_eps2"});
  std::vector<double> scaled;
  Json rows = Json::array();
  for (double e : eps_or(c, {1e-2, 5e-3, 2.5e-3})) {
    FrequencyOptions fo;
    fo.tol = 1e-5;
    const PohozaevResult p = pohozaev_balance(perturbed_fields(b, h, e, 2 * tau / e, fo), c.A, tau / e, 0);
    const double s = std::abs(p.imbalance) / (e * e);
    scaled.push_back(s);
    csv.row({e, p.volume, p.boundary, p.imbalance, p.imbalance / (e * e)});
    rows.push_back({{"eps", e}, {"volume", p.volume}, {"boundary", p.boundary}, {"imbalance", p.imbalance},
                    {"quadrature_error", p.quadrature_error}});
  }
  o.report["local"] = local_json(h);
  o.report["perturbed"] = rows;
  o.report["scaled_spread"] = max_over_min(scaled);
  o.pass = exact_ok && max_over_min(scaled) <= 2;
  o.csv = csv.str();
  return o;
}

Outcome verify_lambda_rate(const Flags& f) {
  const RunConfig c = config_for(f);
  const auto s = criteria_setup(c);
  const CriteriaReport& r = s->report;
  const std::vector<double> eps = eps_or(c, {1e-2, 5e-3, 2.5e-3, 1.25e-3, 1e-3});
  Outcome o;
  o.report = criteria_json(r);
  Csv csv({"eps", "lambda_pred"});
  std::vector<double> lx, ly, norm;
  for (double e : eps) {
    const double lam = lambda_prediction(r, e);
    csv.row({e, lam});
    lx.push_back(std::log(e));
    ly.push_back(std::log(std::abs(lam)));
    norm.push_back(std::abs(lam) / (e * e * std::log(1 / e)));
  }
  const double slope = ls_slope(lx, ly);
  o.report["slope"] = slope;
  if (r.regime == Regime::A) {
    o.report["expected_slope"] = r.m_star - 2;
    o.pass = std::abs(slope - (r.m_star - 2)) <= 0.01;
  } else if (r.regime == Regime::B) {
    o.report["normalized_spread"] = max_over_min(norm) - 1;
    o.pass = max_over_min(norm) - 1 <= 0.01;
  } else {
    o.report["expected_slope"] = 2.0;
    o.pass = std::abs(slope - 2) <= 0.01;
  }
  o.csv = csv.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for blowup analysis of regular Liouville systems"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config, "run configuration (JSON)");
  app.add_option("--out", flags.out, "output directory")->capture_default_str();
  app.add_option("--seed", flags.seed, "random seed");
  app.add_option("--threads", flags.threads, "worker threads");
  app.add_option("--tol", flags.tol, "solver tolerance");

  std::string name;
  std::function<Outcome(const Flags&)> run;
  auto leaf = [&](CLI::App* parent, const std::string& sub, const std::string& help,
                  std::function<Outcome(const Flags&)> fn) {
    CLI::App* cmd = parent->add_subcommand(sub, help);
    cmd->fallthrough();
    const std::string full = parent->get_name() + "_" + sub;
    cmd->callback([&name, &run, full, fn] {
      name = full;
      run = fn;
    });
    return cmd;
  };
  auto group = [&](const std::string& g, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(g, help);
    cmd->require_subcommand(1);
    cmd->fallthrough();
    return cmd;
  };

  CLI::App* bubble = group("bubble", "entire radial bubbles");
  leaf(bubble, "solve", "shoot from alpha", bubble_solve);
  leaf(bubble, "match", "match prescribed masses sigma", bubble_match);
  leaf(group("gamma", "the hypersurface Lambda = 0"), "project", "project a ray onto Lambda = 0", gamma_project_cmd);
  leaf(group("torus", "Green's function of the flat torus"), "green", "Green's function values and checks",
       torus_green)
      ->add_flag("--check", flags.check, "run the Ewald, mean and Robin checks");
  leaf(group("critical", "critical points of f"), "find", "Newton multistart for a critical point", critical_find);
  leaf(group("criteria", "blowup criteria"), "report", "H, D, L and the regime", criteria_report_cmd);

  CLI::App* verify = group("verify", "verification workflows");
  auto eps_opt = [&](CLI::App* cmd) { cmd->add_option("--eps-list", flags.eps_list, "scales")->delimiter(','); };
  leaf(verify, "expansion", "small- and large-r expansions", verify_expansion);
  leaf(verify, "kernels", "kernel ODE residuals and far fields", verify_kernels);
  CLI::App* freq = leaf(verify, "frequency", "correction growth", verify_frequency);
  freq->add_option("--l", flags.l, "angular frequency")->check(CLI::IsMember({0, 1, 2}));
  eps_opt(freq);
  eps_opt(leaf(verify, "fredholm", "weighted-space invertibility", verify_fredholm));
  eps_opt(leaf(verify, "matching", "inner/outer mismatch order", verify_matching));
  eps_opt(leaf(verify, "pohozaev", "local Pohozaev balance", verify_pohozaev));
  CLI::App* res = leaf(verify, "residual", "residual decay", verify_residual);
  eps_opt(res);
  res->add_flag("--grid-check", flags.grid_check, "compare against a doubled grid");
  eps_opt(leaf(verify, "lambda-rate", "vanishing rate of the predicted Lambda", verify_lambda_rate));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Outcome out;
  try {
    out = run(flags);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const StructuralError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const DistinctnessError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const InfeasibleRayError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    out.report = Json::object();
    out.report["error"] = e.what();
    out.pass = false;
  }

  out.report["command"] = name;
  out.report["pass"] = out.pass;
  try {
    std::filesystem::create_directories(flags.out);
    const std::string base = (std::filesystem::path(flags.out) / name).string();
    write_file(base + ".json", dump_json(out.report));
    if (!out.csv.empty()) write_file(base + ".csv", out.csv);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return 1;
  }
  std::cout << name << ": " << (out.pass ? "pass" : "FAIL") << '\n';
  return out.pass ? 0 : 2;
}

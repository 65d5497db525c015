#include "liouville/criteria.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "liouville/errors.hpp"

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kGauss = 30;
// matched masses carry ~1e-9 errors; exponents this close to 0 are logarithmic
constexpr double kLogTol = 1e-6;

// Gauss-Legendre nodes and weights mapped to [a, b].
struct Rule {
  std::vector<double> x, w;
};

Rule gauss_rule(double a, double b) {
  using G = boost::math::quadrature::gauss<double, kGauss>;
  const auto& xs = G::abscissa();
  const auto& ws = G::weights();
  Rule r;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k] == 0.0) {
      r.x.push_back(c);
      r.w.push_back(h * ws[k]);
      continue;
    }
    r.x.push_back(c - h * xs[k]);
    r.w.push_back(h * ws[k]);
    r.x.push_back(c + h * xs[k]);
    r.w.push_back(h * ws[k]);
  }
  return r;
}

// Composite rule: `pieces` equal panels of kGauss points each.
Rule composite(double a, double b, int pieces) {
  Rule out;
  for (int p = 0; p < pieces; ++p) {
    Rule r = gauss_rule(a + (b - a) * p / pieces, a + (b - a) * (p + 1) / pieces);
    out.x.insert(out.x.end(), r.x.begin(), r.x.end());
    out.w.insert(out.w.end(), r.w.begin(), r.w.end());
  }
  return out;
}

int panels(int nodes) { return std::max(1, (nodes + kGauss - 1) / kGauss); }

double reference_length(const PointConfig& c) { return c.N() > 1 ? c.d_min() : 0.5; }

// Σ_i over all (i, t) per-component integrand values: (h_i(x)/h_i(q)) r^{2-m_i} e^{2π m_i ψ(x)}, times r² for dt
// where ψ(x) = γ(x,q_t) + Σ G(x,q_s) - G*(q_t;q_t).
struct CellIntegrand {
  const TorusGreen& g;
  const PointConfig& c;
  const HField& h;
  const Eigen::VectorXd& m;
  int t;
  double gq;
  Eigen::VectorXd lnhq;

  CellIntegrand(const TorusGreen& g_, const PointConfig& c_, const HField& h_, const Eigen::VectorXd& m_, int t_)
      : g(g_), c(c_), h(h_), m(m_), t(t_) {
    gq = g_star(g, c.q[t], c, t);
    lnhq.resize(h.n());
    for (int i = 0; i < h.n(); ++i) lnhq(i) = h.ln_h(i, c.q[t]);
  }

  // values for every component at polar point (r, θ); includes the r² Jacobian of t = ln r
  void operator()(double r, double theta, Eigen::VectorXd& out) const {
    const Vec2 x = c.q[t] + r * Vec2(std::cos(theta), std::sin(theta));
    const double psi = g_star(g, x, c, t) - gq;
    const double lr = std::log(r);
    for (int i = 0; i < h.n(); ++i)
      out(i) = std::exp(h.ln_h(i, x) - lnhq(i) + 2.0 * kPi * m(i) * psi + (2.0 - m(i)) * lr);
  }
};

// Taylor coefficients c_{2k} (in r) of the angular mean of e^{φ_i} about q_t, k = 0..degree.
// c_0 = 1 and c_2 are fixed from the local data; the rest come from a least-squares fit in s = (r/ρ0)².
Eigen::MatrixXd local_coefficients(const CellIntegrand& f, const HLocalData& loc, const Eigen::VectorXd& m,
                                   double rho0, int ntheta) {
  const int n = static_cast<int>(m.size());
  const int degree = 12, nodes = 40;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, degree + 1);
  Eigen::MatrixXd V(nodes, degree - 1);
  Eigen::MatrixXd rhs(nodes, n);
  Eigen::VectorXd val(n), mean(n);
  for (int j = 0; j < nodes; ++j) {
    const double s = 0.5 * (1.0 - std::cos(kPi * (j + 0.5) / nodes));
    const double r = rho0 * std::sqrt(s);
    mean.setZero();
    for (int q = 0; q < ntheta; ++q) {
      f(r, 2.0 * kPi * q / ntheta, val);
      mean += val / ntheta;
    }
    for (int k = 0; k < degree - 1; ++k) V(j, k) = std::pow(s, k);
    for (int i = 0; i < n; ++i) {
      const double c2 = 0.25 * (loc.lap(i) + loc.grad[i].squaredNorm()) * rho0 * rho0;
      const double a = mean(i) * std::pow(r, m(i) - 2.0);
      rhs(j, i) = (a - 1.0 - c2 * s) / (s * s);
    }
  }
  const Eigen::MatrixXd fit = V.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = 1.0;
    out(i, 1) = 0.25 * (loc.lap(i) + loc.grad[i].squaredNorm());
    for (int k = 2; k <= degree; ++k) out(i, k) = fit(k - 2, i) / std::pow(rho0, 2 * k);
  }
  return out;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::A: return "A";
    case Regime::B: return "B";
    case Regime::C: return "C";
    case Regime::Unclassified: return "unclassified";
    case Regime::Degenerate: return "degenerate";
  }
  return "unclassified";
}

Eigen::MatrixXd h_matrix(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& m) {
  c.require_distinct();
  Eigen::MatrixXd H(h.n(), c.N());
  for (int t = 0; t < c.N(); ++t) {
    const double gs = g_star(g, c.q[t], c, t);
    for (int i = 0; i < h.n(); ++i) H(i, t) = 2.0 * kPi * m(i) * gs + h.ln_h(i, c.q[t]);
  }
  return H;
}

Eigen::MatrixXd l_coefficients(const TorusGreen& g, const PointConfig& c, const HField& h) {
  c.require_distinct();
  const int N = c.N();
  Eigen::MatrixXd L(h.n(), N);
  for (int t = 0; t < N; ++t) {
    const Vec2 dg = grad_1_g_star(g, c.q[t], c, t);
    for (int i = 0; i < h.n(); ++i)
      L(i, t) = h.lap_ln_h(i, c.q[t]) + 8.0 * kPi * N + (h.grad_ln_h(i, c.q[t]) + 8.0 * kPi * dg).squaredNorm();
  }
  return L;
}

double CellPolygon::boundary(double theta) const {
  const Vec2 e(std::cos(theta), std::sin(theta));
  double R = std::numeric_limits<double>::infinity();
  for (const Vec2& d : sites) {
    const double p = e.dot(d);
    if (p > 0.0) R = std::min(R, d.squaredNorm() / (2.0 * p));
  }
  return R;
}

double CellPolygon::inradius() const {
  double r = std::numeric_limits<double>::infinity();
  for (const Vec2& d : sites) r = std::min(r, 0.5 * d.norm());
  return r;
}

CellPolygon voronoi_cell(const PointConfig& c, int t) {
  c.require_distinct();
  CellPolygon cell;
  cell.center = c.q[t];
  for (int s = 0; s < c.N(); ++s) {
    const Vec2 base = wrap(c.q[s] - c.q[t]);
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        const Vec2 d = base + Vec2(a, b);
        if (d.norm() > 1e-12) cell.sites.push_back(d);
      }
  }
  auto active = [&](double theta) {
    const Vec2 e(std::cos(theta), std::sin(theta));
    int best = -1;
    double R = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cell.sites.size(); ++k) {
      const double p = e.dot(cell.sites[k]);
      if (p <= 0.0) continue;
      const double v = cell.sites[k].squaredNorm() / (2.0 * p);
      if (v < R) {
        R = v;
        best = static_cast<int>(k);
      }
    }
    return best;
  };
  const int J = 4096;
  int prev = active(0.0);
  for (int j = 1; j <= J; ++j) {
    const double th = 2.0 * kPi * j / J;
    const int cur = active(th);
    if (cur != prev) {
      double lo = 2.0 * kPi * (j - 1) / J, hi = th;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (active(mid) == prev ? lo : hi) = mid;
      }
      cell.corners.push_back(std::fmod(0.5 * (lo + hi), 2.0 * kPi));
      prev = cur;
    }
  }
  std::sort(cell.corners.begin(), cell.corners.end());
  return cell;
}

DResult d_coefficients(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& I,
                       const Eigen::VectorXd& m, const std::vector<double>& tau_fractions, const DOptions& opt) {
  c.require_distinct();
  const int n = h.n(), N = c.N();
  if (tau_fractions.size() < 2) throw ConfigurationError("d_coefficients needs at least two τ values");
  for (int i = 0; i < n; ++i)
    if (m(i) <= 2.0) throw ConfigurationError("d_coefficients requires m_i > 2");
  const double ell = reference_length(c);
  std::vector<double> taus;
  for (double f : tau_fractions) taus.push_back(f * ell);
  std::sort(taus.begin(), taus.end(), std::greater<>());

  DResult res;
  res.D.resize(n, N);
  res.traces.assign(n, std::vector<DTrace>(N));
  for (int t = 0; t < N; ++t) {
    const CellPolygon cell = voronoi_cell(c, t);
    const CellIntegrand f(g, c, h, m, t);
    const double rho0 = 0.5 * cell.inradius();
    if (taus.front() >= rho0) throw ConfigurationError("τ must stay below a quarter of the cell inradius");
    Eigen::VectorXd val(n);

    // outer region: ρ0 ≤ r ≤ R(θ), split at polygon corners
    Eigen::VectorXd outer = Eigen::VectorXd::Zero(n);
    std::vector<double> edges = cell.corners;
    if (edges.empty()) edges.push_back(0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double a = edges[e];
      const double b = (e + 1 < edges.size()) ? edges[e + 1] : edges[0] + 2.0 * kPi;
      const Rule th = composite(a, b, panels(opt.angular_nodes));
      for (std::size_t p = 0; p < th.x.size(); ++p) {
        const double R = cell.boundary(th.x[p]);
        const Rule tr = composite(std::log(rho0), std::log(R), panels(opt.radial_nodes));
        for (std::size_t q = 0; q < tr.x.size(); ++q) {
          f(std::exp(tr.x[q]), th.x[p], val);
          outer += th.w[p] * tr.w[q] * val;
        }
      }
    }

    // inner annuli τ ≤ r ≤ ρ0, periodic trapezoid in θ
    std::vector<Eigen::VectorXd> Fs;
    for (double tau : taus) {
      Eigen::VectorXd inner = Eigen::VectorXd::Zero(n);
      const Rule tr = composite(std::log(tau), std::log(rho0), panels(opt.radial_nodes));
      const int M = opt.annulus_theta;
      for (int k = 0; k < M; ++k) {
        const double th = 2.0 * kPi * k / M;
        for (std::size_t q = 0; q < tr.x.size(); ++q) {
          f(std::exp(tr.x[q]), th, val);
          inner += (2.0 * kPi / M) * tr.w[q] * val;
        }
      }
      Fs.push_back(inner + outer);
    }

    // The integrand is r^{-m} e^{φ} with φ(x) = ln h_i(x)/h_i(q) + 2πm_i ψ(x). The angular mean of e^{φ} is
    // 1 + Σ_k c_{2k} r^{2k}, so F(τ) = D - 2π e^{I} Σ_k c_{2k} τ^{p_k}/p_k with p_k = 2k + 2 - m (ln τ when
    // p_k = 0). c2 = (Δφ + |∇φ|²)/4 is exact; the higher coefficients come from a fit of the angular mean on
    // [0, ρ0]. Terms up to the first p_k ≥ 4 are removed and the remainder is extrapolated.
    const HLocalData loc = local_weight(g, c, h, m, t);
    const Eigen::MatrixXd coef = local_coefficients(f, loc, m, rho0, opt.annulus_theta);
    for (int i = 0; i < n; ++i) {
      DTrace& tr = res.traces[i][t];
      const double eI = std::exp(I(i));
      const int kmax = std::max(2, static_cast<int>(std::ceil(m(i) / 2.0 - 1e-9)));
      if (kmax >= coef.cols()) throw ConfigurationError("m_i too large for the local expansion");
      tr.log_corrected = false;
      for (int k = 1; k <= kmax; ++k)
        tr.log_corrected = tr.log_corrected || std::abs(2.0 * k + 2.0 - m(i)) < kLogTol;
      tr.exponent = 2.0 * (kmax + 1) + 2.0 - m(i);
      for (std::size_t q = 0; q < taus.size(); ++q) {
        const double tau = taus[q];
        double F = -2.0 * kPi * eI / (m(i) - 2.0) * std::pow(tau, 2.0 - m(i)) + eI * Fs[q](i);
        tr.tau.push_back(tau);
        tr.F.push_back(F);
        for (int k = 1; k <= kmax; ++k) {
          const double p = 2.0 * k + 2.0 - m(i);
          F += 2.0 * kPi * eI * coef(i, k) * (std::abs(p) < kLogTol ? std::log(tau) : std::pow(tau, p) / p);
        }
        tr.corrected.push_back(F);
      }
      for (std::size_t k = 0; k + 1 < taus.size(); ++k) {
        const double p = tr.exponent;
        const double a = std::pow(taus[k], p), b = std::pow(taus[k + 1], p);
        tr.extrapolated.push_back((tr.corrected[k + 1] * a - tr.corrected[k] * b) / (a - b));
      }
      const double D = tr.extrapolated.back();
      if (tr.extrapolated.size() >= 2)
        tr.spread = std::abs(tr.extrapolated.back() - tr.extrapolated[tr.extrapolated.size() - 2]) /
                    std::max(std::abs(D), 1e-300);
      res.D(i, t) = D;
      if (tr.spread > opt.spread_tol)
        throw ResolutionError("D extrapolation spread " + std::to_string(tr.spread) + " exceeds tolerance");
    }
  }
  return res;
}

Regime classify_regime(double m_star, double S_D, double S_L, double scale_D, double scale_L) {
  if (m_star <= 2.0) return Regime::Degenerate;
  const bool d_nonzero = std::abs(S_D) > 1e-8 * scale_D;
  const bool l_nonzero = std::abs(S_L) > 1e-8 * scale_L;
  if (std::abs(m_star - 4.0) < 1e-9) {
    if (l_nonzero) return Regime::B;
    if (d_nonzero) return Regime::C;
    return Regime::Unclassified;
  }
  if (m_star < 4.0 && d_nonzero) return Regime::A;
  return Regime::Unclassified;
}

EpsilonRatios epsilon_ratios(const Eigen::MatrixXd& H, const Eigen::VectorXd& m, double eps1) {
  EpsilonRatios out;
  const int n = static_cast<int>(H.rows()), N = static_cast<int>(H.cols());
  for (int i = 0; i < n; ++i)
    if (m(i) <= 2.0) throw ConfigurationError("epsilon_ratios requires m_i > 2");
  out.eps.push_back(eps1);
  for (int t = 1; t < N; ++t) {
    const double c0 = (H(0, t) - H(0, 0)) / (m(0) - 2.0);
    out.eps.push_back(eps1 * std::exp(c0));
    for (int i = 1; i < n; ++i) {
      const double ci = (H(i, t) - H(i, 0)) / (m(i) - 2.0);
      out.inconsistency = std::max(out.inconsistency, std::abs(ci - c0));
    }
  }
  out.warning = out.inconsistency > 1e-6;
  return out;
}

CriteriaReport criteria_report(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& I,
                               const Eigen::VectorXd& m, const std::vector<double>& tau_fractions,
                               const DOptions& opt) {
  CriteriaReport r;
  r.m = m;
  r.m_star = m.minCoeff();
  r.H = h_matrix(g, c, h, m);
  r.L = l_coefficients(g, c, h);
  DResult d = d_coefficients(g, c, h, I, m, tau_fractions, opt);
  r.D = d.D;
  r.traces = std::move(d.traces);
  double scale_D = 0.0, scale_L = 0.0;
  for (int i = 0; i < h.n(); ++i)
    for (int t = 0; t < c.N(); ++t) {
      const double w = std::exp(r.H(i, t) - r.H(i, 0));
      const bool hat = std::abs(m(i) - r.m_star) < 1e-9;
      r.S_D += r.D(i, t) * w;
      r.S_L += r.L(i, t) * w;
      if (hat) {
        r.S_D_hat += r.D(i, t) * w;
        r.S_L_hat += r.L(i, t) * w;
      }
      scale_D = std::max(scale_D, std::abs(r.D(i, t) * w));
      scale_L = std::max(scale_L, std::abs(r.L(i, t) * w));
    }
  r.regime = classify_regime(r.m_star, r.S_D, r.S_L, std::max(scale_D, 1e-300), std::max(scale_L, 1e-300));
  return r;
}

double lambda_prediction(const CriteriaReport& r, double eps1, LambdaForm form) {
  const int n = static_cast<int>(r.H.rows()), N = static_cast<int>(r.H.cols());
  const double le = std::log(1.0 / eps1);
  double sum = 0.0;
  switch (r.regime) {
    case Regime::A:
      for (int i = 0; i < n; ++i) {
        const bool hat = std::abs(r.m(i) - r.m_star) < 1e-9;
        if (form == LambdaForm::Restricted && !hat) continue;
        const double mi = form == LambdaForm::Restricted ? r.m_star : r.m(i);
        for (int t = 0; t < N; ++t)
          sum += (2.0 - mi) / N * r.D(i, t) * std::exp(r.H(i, t) - r.H(i, 0)) * std::pow(eps1, mi - 2.0);
      }
      return sum;
    case Regime::B:
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < N; ++t) sum += r.L(i, t) * std::exp(r.H(i, t) - r.H(i, 0));
      return -2.0 / N * sum * eps1 * eps1 * le;
    case Regime::C:
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < N; ++t) sum += r.D(i, t) * std::exp(r.H(i, t) - r.H(i, 0));
      return -2.0 / N * sum * eps1 * eps1;
    default:
      throw ConfigurationError(std::string("no Λ prediction for regime ") + regime_name(r.regime));
  }
}

HLocalData local_weight(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& m, int t) {
  const int n = h.n();
  HLocalData d;
  d.value.resize(n);
  d.grad.resize(n);
  d.hess.resize(n);
  const Vec2 dg = grad_1_g_star(g, c.q[t], c, t);
  const Mat2 hg = hess_1_g_star(g, c.q[t], c, t);
  for (int i = 0; i < n; ++i) {
    d.value(i) = h.h(i, c.q[t]);
    d.grad[i] = h.grad_ln_h(i, c.q[t]) + 2.0 * kPi * m(i) * dg;
    d.hess[i] = h.hess_ln_h(i, c.q[t]) + 2.0 * kPi * m(i) * hg;
  }
  return d;
}

}  // namespace liouville

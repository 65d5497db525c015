#include "liouville/linearized.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>

#include "liouville/errors.hpp"

namespace liouville {

namespace odeint = boost::numeric::odeint;

namespace {
constexpr double kPi = std::numbers::pi;

// C² smoothstep: 0 at s ≤ 0, 1 at s ≥ 1
double smoothstep(double s) {
  if (s <= 0) return 0;
  if (s >= 1) return 1;
  return s * s * s * (10 - 15 * s + 6 * s * s);
}

// 1 on [0, R/3], 0 beyond 2R/3
double cutoff(double r, double R) { return 1.0 - smoothstep(3.0 * r / R - 1.0); }

void series_coeffs(const RadialBubble& b, int i, double* bc, double* dc) {
  const auto& a = b.coupling.entries();
  double s1 = 0, s2 = 0;
  for (int j = 0; j < b.n(); ++j) {
    s1 += a(i, j) * std::exp(b.alpha[j]);
    for (int l = 0; l < b.n(); ++l) s2 += a(i, j) * a(j, l) * std::exp(b.alpha[j] + b.alpha[l]);
  }
  *bc = -0.25 * s1;
  *dc = s2 / 64.0;
}

// 4-point Lagrange interpolation on a uniform grid
// d/dt of the same 4-point Lagrange interpolant
double interp_dt(const std::vector<double>& t, const Eigen::MatrixXd& g, int i, double x) {
  const int K = static_cast<int>(t.size());
  const double h = t[1] - t[0];
  x = std::clamp(x, t.front(), t.back());
  int k = static_cast<int>((x - t[0]) / h);
  k = std::clamp(k - 1, 0, K - 4);
  double s = 0;
  for (int a = 0; a < 4; ++a) {
    double dw = 0;
    for (int c = 0; c < 4; ++c) {
      if (c == a) continue;
      double w = 1 / (t[k + a] - t[k + c]);
      for (int e = 0; e < 4; ++e)
        if (e != a && e != c) w *= (x - t[k + e]) / (t[k + a] - t[k + e]);
      dw += w;
    }
    s += dw * g(i, k + a);
  }
  return s;
}

double interp(const std::vector<double>& t, const Eigen::MatrixXd& g, int i, double x) {
  const int K = static_cast<int>(t.size());
  const double h = t[1] - t[0];
  if (x <= t.front()) return g(i, 0);
  if (x >= t.back()) return g(i, K - 1);
  int k = static_cast<int>((x - t[0]) / h);
  k = std::clamp(k - 1, 0, K - 4);
  double s = 0;
  for (int a = 0; a < 4; ++a) {
    double w = 1;
    for (int c = 0; c < 4; ++c)
      if (c != a) w *= (x - t[k + c]) / (t[k + a] - t[k + c]);
    s += w * g(i, k + a);
  }
  return s;
}
}  // namespace

HLocalData HLocalData::constant(int n) {
  HLocalData h;
  h.value = Eigen::VectorXd::Ones(n);
  h.grad.assign(n, Vec2::Zero());
  h.hess.assign(n, Mat2::Zero());
  return h;
}

double KernelField::profile(int i, double r) const {
  if (frequency == 0) return bubble->rdv(i, r) + 2.0;
  return bubble->dv(i, r);
}

std::array<KernelField, 3> kernel_fields(const RadialBubble& b) {
  auto shared = std::make_shared<const RadialBubble>(b);
  std::array<KernelField, 3> out;
  const int n = b.n();
  const auto& a = b.coupling.entries();
  const double t_check = std::min(b.t1(), std::log(1e3));

  for (int l = 0; l < 2; ++l) {
    using State = std::vector<double>;
    State x(2 * n);
    const double r0 = std::exp(b.t0()), r2 = r0 * r0;
    for (int i = 0; i < n; ++i) {
      double bc, dc;
      series_coeffs(b, i, &bc, &dc);
      if (l == 0) {
        x[i] = 2 + 2 * bc * r2 + 4 * dc * r2 * r2;
        x[n + i] = 4 * bc * r2 + 16 * dc * r2 * r2;
      } else {
        x[i] = 2 * bc * r0 + 4 * dc * r0 * r2;
        x[n + i] = 2 * bc * r0 + 12 * dc * r0 * r2;
      }
    }
    const double ll = l * l;
    auto rhs = [&](const State& s, State& ds, double t) {
      const double r = std::exp(t);
      for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < n; ++j) acc += a(i, j) * std::exp(b.v(j, r) + 2 * t) * s[j];
        ds[i] = s[n + i];
        ds[n + i] = ll * s[i] - acc;
      }
    };
    std::vector<double> times;
    for (int k = 0; k < b.nodes() && b.t_node(k) <= t_check; ++k) times.push_back(b.t_node(k));
    double res = 0;
    std::size_t idx = 0;
    auto obs = [&](const State& s, double t) {
      const double r = std::exp(t);
      for (int i = 0; i < n; ++i) {
        const double z = l == 0 ? b.rdv(i, r) + 2.0 : b.dv(i, r);
        res = std::max(res, std::abs(s[i] - z));
      }
      ++idx;
    };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(1e-13, 1e-13);
    odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), 1e-3, obs);
    for (int f = (l == 0 ? 0 : 1); f <= (l == 0 ? 0 : 2); ++f) {
      out[f].frequency = f;
      out[f].bubble = shared;
      out[f].ode_residual = res;
    }
  }
  out[0].far_field_error.resize(n);
  for (int i = 0; i < n; ++i) out[0].far_field_error[i] = std::abs(b.rdv(i, b.R * (1 - 1e-12)) + 2.0 - (2.0 - b.m[i]));
  return out;
}

double CorrectionProfile::value(int i, double r) const {
  if (r >= r_out) return 0.0;
  return interp(t, g, i, std::log(r));
}

double CorrectionProfile::derivative(int i, double r) const {
  if (r >= r_out) return 0.0;
  // g ~ r^ℓ below the first node; use the slope there
  r = std::max(r, std::exp(t.front()));
  return interp_dt(t, g, i, std::log(r)) / r;
}

double CorrectionProfile::sup_ratio(double eps, double p) const {
  double s = 0;
  for (int k = 0; k < nodes(); ++k) {
    const double r = std::exp(t[k]);
    for (int i = 0; i < g.rows(); ++i) s = std::max(s, std::abs(g(i, k)) / (eps * std::pow(1 + r, p)));
  }
  return s;
}

namespace {

CorrectionProfile solve_ivp0(const RadialBubble& b, const RadialSource& source, double r_out, const FrequencyOptions& opt,
                             const Eigen::VectorXd& H) {
  using State = std::vector<double>;
  const int n = b.n();
  const auto& a = b.coupling.entries();
  const double t0 = std::log(std::exp(b.t0())), T = std::log(r_out);
  const int K = std::max(16, static_cast<int>(std::ceil((T - t0) / opt.h0)));
  CorrectionProfile p;
  p.l = 0;
  p.r_out = r_out;
  p.t.resize(K + 1);
  for (int k = 0; k <= K; ++k) p.t[k] = t0 + (T - t0) * k / K;
  p.g.resize(n, K + 1);
  State x(2 * n);
  const double r0 = std::exp(t0);
  // c ≈ s(0) r²/4 near the origin
  for (int i = 0; i < n; ++i) {
    x[i] = source(i, r0) * r0 * r0 / 4;
    x[n + i] = 2 * x[i];
  }
  auto rhs = [&](const State& s, State& ds, double t) {
    const double r = std::exp(t), e2 = std::exp(2 * t);
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      for (int j = 0; j < n; ++j) acc += a(i, j) * H[j] * b.ev(j, r) * s[j];
      ds[i] = s[n + i];
      ds[n + i] = e2 * (source(i, r) - acc);
    }
  };
  int k = 0;
  auto obs = [&](const State& s, double) {
    for (int i = 0; i < n; ++i) p.g(i, k) = s[i];
    ++k;
  };
  auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(opt.tol * 1e-4, opt.tol * 1e-4);
  odeint::integrate_times(stepper, rhs, x, p.t.begin(), p.t.end(), opt.h0 * 0.1, obs);
  return p;
}

struct BvpResult {
  std::vector<double> t;
  Eigen::MatrixXd g;
  bool projected = false;
  double multiplier = 0, ratio = 0;
};

// Smallest singular value of M by inverse iteration on MᵀM.
double sigma_min_estimate(Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu, int N) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(N).normalized();
  double lam = 0;
  for (int it = 0; it < 40; ++it) {
    Eigen::VectorXd y = lu.transpose().solve(x);
    Eigen::VectorXd z = lu.solve(y);
    const double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0) return 0.0;
    const double prev = lam;
    lam = nz;
    x = z / nz;
    if (it > 3 && std::abs(lam - prev) < 1e-6 * lam) break;
  }
  return 1.0 / std::sqrt(lam);
}

BvpResult solve_bvp(const RadialBubble& b, int l, const RadialSource& source, double r_out, int K,
                    const FrequencyOptions& opt, const Eigen::VectorXd& H) {
  const int n = b.n();
  const auto& a = b.coupling.entries();
  const double t0 = std::log(opt.r_min), T = std::log(r_out);
  const double hh = (T - t0) / K;
  BvpResult res;
  res.t.resize(K + 1);
  for (int k = 0; k <= K; ++k) res.t[k] = t0 + hh * k;

  // unknowns G_{i,k}, k = 0..K-1; G_{i,K} = 0
  auto id = [&](int i, int k) { return k * n + i; };
  const int N = n * K;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(N);
  Eigen::MatrixXd ev(n, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < n; ++j) ev(j, k) = b.ev(j, std::exp(res.t[k]));
  const double ih2 = 1.0 / (hh * hh);
  for (int k = 0; k < K; ++k) {
    const double e2 = std::exp(2 * res.t[k]), r = std::exp(res.t[k]);
    for (int i = 0; i < n; ++i) {
      const int row = id(i, k);
      double diag = -2 * ih2 - l * l;
      if (k == 0) {
        // ghost node from G_t = ℓ G
        trip.emplace_back(row, id(i, 1), 2 * ih2);
        diag -= 2 * hh * l * ih2;
      } else {
        trip.emplace_back(row, id(i, k - 1), ih2);
        if (k + 1 < K) trip.emplace_back(row, id(i, k + 1), ih2);
      }
      for (int j = 0; j < n; ++j) {
        const double c = e2 * a(i, j) * H[j] * ev(j, k);
        if (j == i)
          diag += c;
        else if (c != 0)
          trip.emplace_back(row, id(j, k), c);
      }
      trip.emplace_back(row, row, diag);
      rhs[row] = e2 * source(i, r);
    }
  }
  Eigen::SparseMatrix<double> M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  bool singular = lu.info() != Eigen::Success;
  double norm = 0;
  for (int c = 0; c < M.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(M, c); it; ++it) norm = std::max(norm, std::abs(it.value()));
  res.ratio = singular ? 0.0 : sigma_min_estimate(lu, N) / norm;

  using P = FrequencyOptions::Projection;
  const bool near = singular || res.ratio < opt.singular_tol;
  bool project = (l == 1) && (opt.projection == P::Always || (near && opt.projection == P::Auto));
  if (near && !project)
    throw RequiresProjectionError("frequency-" + std::to_string(l) + " operator is near-singular (σ_min/‖M‖ = " +
                                  std::to_string(res.ratio) + ")");

  Eigen::VectorXd sol;
  if (!project) {
    sol = lu.solve(rhs);
  } else {
    // bordered system: M g - c e^{2t} A E K_χ = rhs, <g, Δ_1(A^{-1} K_χ)> = 0
    if (!b.coupling.invertible()) throw StructuralError("coupling matrix must be invertible for the projected solve");
    const Eigen::MatrixXd& ainv = b.coupling.inverse();
    Eigen::MatrixXd Kc(n, K + 1), Phi(n, K + 1);
    for (int k = 0; k <= K; ++k) {
      const double r = std::exp(res.t[k]);
      for (int i = 0; i < n; ++i) Kc(i, k) = (k == K) ? 0.0 : b.dv(i, r) * cutoff(r, r_out);
    }
    Phi = ainv * Kc;
    Eigen::VectorXd col(N), crow(N);
    for (int k = 0; k < K; ++k) {
      const double e2 = std::exp(2 * res.t[k]);
      const double w = (k == 0 ? 0.5 : 1.0) * hh * e2;  // r² dt
      for (int i = 0; i < n; ++i) {
        double ak = 0;
        for (int j = 0; j < n; ++j) ak += a(i, j) * H[j] * ev(j, k) * Kc(j, k);
        col[id(i, k)] = e2 * ak;
        const double left = k == 0 ? Phi(i, 1) - 2 * hh * Phi(i, 0) : Phi(i, k - 1);
        const double y = ((left - 2 * Phi(i, k) + Phi(i, k + 1)) * ih2 - Phi(i, k)) / e2;
        crow[id(i, k)] = w * y;
      }
    }
    const double sc = col.cwiseAbs().maxCoeff(), sr = crow.cwiseAbs().maxCoeff();
    col /= sc;
    crow /= sr;
    std::vector<Eigen::Triplet<double>> t2 = trip;
    for (int q = 0; q < N; ++q) {
      if (col[q] != 0) t2.emplace_back(q, N, -col[q]);
      if (crow[q] != 0) t2.emplace_back(N, q, crow[q]);
    }
    Eigen::SparseMatrix<double> B(N + 1, N + 1);
    B.setFromTriplets(t2.begin(), t2.end());
    B.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lb;
    lb.compute(B);
    if (lb.info() != Eigen::Success) throw DegenerateProjectionError("bordered frequency-1 system is singular");
    Eigen::VectorXd r2(N + 1);
    r2.head(N) = rhs;
    r2[N] = 0;
    Eigen::VectorXd s2 = lb.solve(r2);
    sol = s2.head(N);
    res.multiplier = s2[N] / sc;
    res.projected = true;
  }
  res.g = Eigen::MatrixXd::Zero(n, K + 1);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) res.g(i, k) = sol[id(i, k)];
  return res;
}

}  // namespace

CorrectionProfile solve_frequency(const RadialBubble& b, int l, const RadialSource& source, double r_out,
                                  const FrequencyOptions& opt) {
  if (l < 0 || l > 2) throw ConfigurationError("frequency must be 0, 1 or 2");
  if (r_out <= opt.r_min * 10) throw ConfigurationError("outer radius too small");
  const Eigen::VectorXd H = opt.H.size() ? opt.H : Eigen::VectorXd::Ones(b.n());
  if (l == 0) return solve_ivp0(b, source, r_out, opt, H);

  int K = std::max(16, static_cast<int>(std::ceil((std::log(r_out) - std::log(opt.r_min)) / opt.h0)));
  BvpResult prev = solve_bvp(b, l, source, r_out, K, opt, H);
  // σ_min/‖M‖ shrinks like h², so the coarse grid decides the path for all refinements
  FrequencyOptions fine = opt;
  fine.projection = prev.projected ? FrequencyOptions::Projection::Always : FrequencyOptions::Projection::Never;
  fine.singular_tol = 0.0;
  const double coarse_ratio = prev.ratio;
  double change = INFINITY;
  for (int ref = 0; ref < opt.max_refine; ++ref) {
    K *= 2;
    BvpResult cur = solve_bvp(b, l, source, r_out, K, fine, H);
    const int Kc = static_cast<int>(prev.t.size());
    double diff = 0, scale = 0;
    for (int k = 0; k < Kc; ++k)
      for (int i = 0; i < b.n(); ++i) {
        diff = std::max(diff, std::abs(cur.g(i, 2 * k) - prev.g(i, k)));
        scale = std::max(scale, std::abs(cur.g(i, 2 * k)));
      }
    change = scale > 0 ? diff / scale : diff;
    prev = std::move(cur);
    if (change <= opt.tol || scale == 0) {
      change = scale == 0 ? 0.0 : change;
      break;
    }
  }
  if (change > opt.tol)
    throw RefineGridError("frequency-" + std::to_string(l) + " solve did not converge under grid doubling (change " +
                          std::to_string(change) + ")");
  CorrectionProfile p;
  p.l = l;
  p.r_out = r_out;
  p.t = std::move(prev.t);
  p.g = std::move(prev.g);
  p.projected = prev.projected;
  p.multiplier = prev.multiplier;
  p.sigma_min_ratio = coarse_ratio;
  p.refinement_change = change;
  return p;
}

RadialSource first_order_source(const RadialBubble& b, const HLocalData& h, double eps, int s) {
  auto bb = std::make_shared<const RadialBubble>(b);
  Eigen::VectorXd d(b.n());
  for (int j = 0; j < b.n(); ++j) d[j] = h.grad[j][s];
  return [bb, d, eps](int i, double r) {
    double acc = 0;
    for (int j = 0; j < bb->n(); ++j) acc += bb->coupling(i, j) * d[j] * bb->ev(j, r);
    return -eps * r * acc;
  };
}

SecondOrderSources second_order_source(const RadialBubble& b, const HLocalData& h, double eps,
                                       const CorrectionProfile& g1x, const CorrectionProfile& g1y) {
  auto bb = std::make_shared<const RadialBubble>(b);
  auto hx = std::make_shared<const CorrectionProfile>(g1x);
  auto hy = std::make_shared<const CorrectionProfile>(g1y);
  auto hd = std::make_shared<const HLocalData>(h);
  // P_j = g_{x,j} + ε r ∂_1 ln h_j, Q_j = g_{y,j} + ε r ∂_2 ln h_j
  auto pq = [bb, hx, hy, hd, eps](int j, double r, double* P, double* Q) {
    *P = hx->value(j, r) + eps * r * hd->grad[j][0];
    *Q = hy->value(j, r) + eps * r * hd->grad[j][1];
  };
  SecondOrderSources s;
  s.l0 = [bb, hd, pq, eps](int i, double r) {
    double acc = 0;
    for (int j = 0; j < bb->n(); ++j) {
      const double a = bb->coupling(i, j);
      if (a == 0) continue;
      double P, Q;
      pq(j, r, &P, &Q);
      acc += a * hd->value[j] * bb->ev(j, r) * (eps * eps * r * r * hd->lap(j) + P * P + Q * Q);
    }
    return 0.25 * acc;
  };
  s.l2_cos = [bb, hd, pq, eps](int i, double r) {
    double acc = 0;
    for (int j = 0; j < bb->n(); ++j) {
      const double a = bb->coupling(i, j);
      if (a == 0) continue;
      double P, Q;
      pq(j, r, &P, &Q);
      const Mat2& H = hd->hess[j];
      acc += a * hd->value[j] * bb->ev(j, r) * 0.25 * (eps * eps * r * r * (H(0, 0) - H(1, 1)) + P * P - Q * Q);
    }
    return acc;
  };
  s.l2_sin = [bb, hd, pq, eps](int i, double r) {
    double acc = 0;
    for (int j = 0; j < bb->n(); ++j) {
      const double a = bb->coupling(i, j);
      if (a == 0) continue;
      double P, Q;
      pq(j, r, &P, &Q);
      acc += a * hd->value[j] * bb->ev(j, r) * 0.5 * (eps * eps * r * r * hd->hess[j](0, 1) + P * Q);
    }
    return acc;
  };
  return s;
}

double z0_moment(const RadialBubble& b, int j, double R) {
  // 2π ∫ e^{v + 4t} (r v' + 2) dt, Simpson in t = ln r
  const double ta = std::log(1e-8), tb = std::log(R);
  int K = static_cast<int>(std::ceil((tb - ta) / 0.004));
  K += K % 2;
  const double h = (tb - ta) / K;
  double s = 0;
  for (int k = 0; k <= K; ++k) {
    const double t = ta + h * k, r = std::exp(t);
    const double f = std::exp(b.v(j, r) + 4 * t) * (b.rdv(j, r) + 2);
    s += f * ((k == 0 || k == K) ? 1 : (k % 2 ? 4 : 2));
  }
  return 2 * kPi * s * h / 3;
}

BCoefficient b_coefficient(const RadialBubble& b, const HLocalData& h, double eps, double r_out) {
  const int n = b.n();
  BCoefficient out;
  out.b = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mom(n);
  for (int j = 0; j < n; ++j) mom[j] = z0_moment(b, j, r_out);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = b.coupling(i, j);
      if (a == 0) continue;
      out.b[i] -= a * b.m[j] * h.value[j] * (h.lap(j) + h.grad[j].squaredNorm()) * eps * eps * mom[j];
    }
  out.ratio = out.b / (eps * eps * std::log(1.0 / eps));
  out.regime_warning = std::abs(b.m.minCoeff() - 4.0) > 1e-6;
  return out;
}

PolarField sample_kernel(const RadialBubble& b, const PolarGrid& g, int l) {
  PolarField f(b.n(), Eigen::MatrixXd(g.K, g.M));
  for (int k = 0; k < g.K; ++k) {
    const double r = g.r(k);
    for (int i = 0; i < b.n(); ++i) {
      const double p = l == 0 ? b.rdv(i, r) + 2.0 : b.dv(i, r);
      for (int m = 0; m < g.M; ++m) {
        const double th = g.theta(m);
        f[i](k, m) = l == 0 ? p : (l == 1 ? p * std::cos(th) : p * std::sin(th));
      }
    }
  }
  return f;
}

KernelProjection project_kernels(const PolarField& field, const PolarGrid& g, const RadialBubble& b) {
  if (static_cast<int>(field.size()) != b.n()) throw StructuralError("field has wrong number of components");
  double res[3];
  for (int l = 0; l < 3; ++l) {
    PolarField z = sample_kernel(b, g, l);
    PolarField ez = z;
    for (int i = 0; i < b.n(); ++i)
      for (int k = 0; k < g.K; ++k) ez[i].row(k) *= b.ev(i, g.r(k));
    const double num = pair(g, ez, field), den = pair(g, ez, z);
    if (!(std::abs(den) > 1e-300)) throw DegenerateProjectionError("vanishing kernel Gram value");
    res[l] = num / den;
  }
  return {res[0], res[1], res[2]};
}

}  // namespace liouville

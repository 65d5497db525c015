#include "liouville/assembly.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <thread>

#include "liouville/errors.hpp"
#include "liouville/fredholm.hpp"

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 node(int a, int b, int M) { return Vec2(static_cast<double>(a) / M, static_cast<double>(b) / M); }

void parallel_rows(int M, int threads, const std::function<void(int)>& row) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (int a = 0; a < M; ++a) row(a);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int a = w; a < M; a += threads) row(a);
    });
  for (auto& th : pool) th.join();
}

// Real 2-D FFT helpers on an M x M periodic grid with unit period.
class Spectral {
 public:
  explicit Spectral(int M) : M_(M), Mh_(M / 2 + 1) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(M) * M);
    cplx_ = fftw_alloc_complex(static_cast<std::size_t>(M) * Mh_);
    fwd_ = fftw_plan_dft_r2c_2d(M, M, real_, cplx_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(M, M, cplx_, real_, FFTW_ESTIMATE);
  }
  ~Spectral() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(cplx_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  int wave(int a) const { return a <= M_ / 2 ? a : a - M_; }

  // -Δf
  Eigen::MatrixXd neg_laplacian(const Eigen::MatrixXd& f) {
    load(f);
    fftw_execute(fwd_);
    for (int a = 0; a < M_; ++a)
      for (int b = 0; b < Mh_; ++b) {
        const double k2 = 4.0 * kPi * kPi * (std::pow(wave(a), 2) + std::pow(b, 2));
        const std::size_t idx = static_cast<std::size_t>(a) * Mh_ + b;
        cplx_[idx][0] *= k2 / (double(M_) * M_);
        cplx_[idx][1] *= k2 / (double(M_) * M_);
      }
    fftw_execute(bwd_);
    return unload();
  }

  // fraction of spectral energy with max(|k1|, |k2|) > M/4
  double tail_fraction(const Eigen::MatrixXd& f) {
    load(f);
    fftw_execute(fwd_);
    double tot = 0, tail = 0;
    for (int a = 0; a < M_; ++a)
      for (int b = 0; b < Mh_; ++b) {
        const std::size_t idx = static_cast<std::size_t>(a) * Mh_ + b;
        if (a == 0 && b == 0) continue;
        const double w = (b == 0 || 2 * b == M_) ? 1.0 : 2.0;
        const double e = w * (cplx_[idx][0] * cplx_[idx][0] + cplx_[idx][1] * cplx_[idx][1]);
        tot += e;
        if (std::max(std::abs(wave(a)), b) > M_ / 4) tail += e;
      }
    return tot > 0 ? tail / tot : 0.0;
  }

 private:
  int M_, Mh_;
  double* real_;
  fftw_complex* cplx_;
  fftw_plan fwd_, bwd_;

  void load(const Eigen::MatrixXd& f) {
    for (int a = 0; a < M_; ++a)
      for (int b = 0; b < M_; ++b) real_[static_cast<std::size_t>(a) * M_ + b] = f(a, b);
  }
  Eigen::MatrixXd unload() const {
    Eigen::MatrixXd f(M_, M_);
    for (int a = 0; a < M_; ++a)
      for (int b = 0; b < M_; ++b) f(a, b) = real_[static_cast<std::size_t>(a) * M_ + b];
    return f;
  }
};

// Gauss-Legendre panels on [a, b]
void gauss_panels(double a, double b, int panels, std::vector<double>& x, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, 20>;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    for (std::size_t k = 0; k < G::abscissa().size(); ++k) {
      const double xs = G::abscissa()[k], ws = G::weights()[k];
      if (xs == 0.0) {
        x.push_back(c);
        w.push_back(h * ws);
        continue;
      }
      x.push_back(c - h * xs);
      w.push_back(h * ws);
      x.push_back(c + h * xs);
      w.push_back(h * ws);
    }
  }
}

double inner_value(const BlowupConfig& c, int i, int t, double r, double gstar_x, double gstar_q) {
  const double eps = c.eps[t];
  return c.bubble->v(i, r / eps) - 2.0 * std::log(eps) - std::log(c.rho(i) * c.h.h(i, c.points.q[t])) +
         2.0 * kPi * c.m()(i) * (gstar_x - gstar_q);
}

}  // namespace

double BlowupConfig::separation() const { return std::min(points.d_min(), 1.0); }

BlowupConfig make_config(const TorusGreen& g, const CouplingMatrix& A, const Eigen::VectorXd& rho,
                         const PointConfig& points, const HField& h, double eps1, double tau, int grid,
                         const Eigen::VectorXd& alpha_init) {
  points.require_distinct();
  const int n = A.n(), N = points.N();
  if (rho.size() != n || h.n() != n) throw ConfigurationError("rho and h must have one entry per component");
  const double lam = lambda_in(A, ParamVector{rho, N});
  const double scale = 4.0 * rho.sum() / (2.0 * kPi * N);
  if (std::abs(lam) > 1e-10 * scale) throw ConfigurationError("rho is not on Γ_N: Λ = " + std::to_string(lam));
  BlowupConfig c;
  c.A = A;
  c.rho = rho;
  c.points = points;
  c.h = h;
  c.grid = grid;
  const double sep = c.separation();
  c.tau = tau > 0 ? tau : sep / 4.0;
  if (c.tau > sep / 4.0 + 1e-15) throw ConfigurationError("tau must not exceed d_min/4");
  const Eigen::VectorXd sigma = rho / (2.0 * kPi * N);
  const Eigen::VectorXd a0 = alpha_init.size() == n ? alpha_init : Eigen::VectorXd::Zero(n);
  c.bubble = std::make_shared<const RadialBubble>(match_sigma(A, sigma, a0));
  if ((c.bubble->sigma - sigma).cwiseAbs().maxCoeff() > 1e-6 * sigma.cwiseAbs().maxCoeff())
    throw ConfigurationError("matched bubble masses disagree with ρ/(2πN)");
  if ((c.bubble->m.array() <= 2.0).any()) throw ConfigurationError("local masses must exceed 2");
  return with_eps(g, c, eps1);
}

BlowupConfig with_eps(const TorusGreen& g, const BlowupConfig& c0, double eps1) {
  BlowupConfig c = c0;
  if (!(eps1 > 0.0) || eps1 >= c.separation() / 10.0) throw ConfigurationError("eps1 must lie in (0, d_min/10)");
  c.eps1 = eps1;
  c.H = h_matrix(g, c.points, c.h, c.m());
  c.eps = epsilon_ratios(c.H, c.m(), eps1).eps;
  return c;
}

GreenTable green_table(const TorusGreen& g, const PointConfig& points, int M, int threads) {
  GreenTable tab;
  tab.M = M;
  const std::size_t sz = static_cast<std::size_t>(M) * M;
  tab.nearest.assign(sz, 0);
  tab.dist.assign(sz, 0.0);
  tab.gstar.assign(sz, 0.0);
  parallel_rows(M, threads, [&](int a) {
    for (int b = 0; b < M; ++b) {
      const Vec2 x = node(a, b, M);
      int best = 0;
      double d = torus_distance(x, points.q[0]);
      for (int t = 1; t < points.N(); ++t) {
        const double dt = torus_distance(x, points.q[t]);
        if (dt < d) {
          d = dt;
          best = t;
        }
      }
      const std::size_t idx = static_cast<std::size_t>(a) * M + b;
      tab.nearest[idx] = best;
      tab.dist[idx] = d;
      tab.gstar[idx] = g_star(g, x, points, best);
    }
  });
  return tab;
}

double inner_form(const TorusGreen& g, const BlowupConfig& c, int i, int t, const Vec2& x) {
  const Vec2& q = c.points.q[t];
  return inner_value(c, i, t, torus_distance(x, q), g_star(g, x, c.points, t), g_star(g, q, c.points, t));
}

double outer_form(const TorusGreen& g, const BlowupConfig& c, const ApproxSolution& s, int i, const Vec2& x) {
  double sum = 0.0;
  for (int t = 0; t < c.N(); ++t) sum += g.green(x, c.points.q[t]);
  return s.ubar(i) + 2.0 * kPi * c.m()(i) * sum;
}

ApproxSolution assemble(const TorusGreen& g, const BlowupConfig& c, const GreenTable* table) {
  const int n = c.n(), N = c.N(), M = c.grid;
  GreenTable local;
  if (!table || table->M != M) {
    local = green_table(g, c.points, M);
    table = &local;
  }
  const Eigen::VectorXd& m = c.m();
  const Eigen::VectorXd& I = c.bubble->I;
  std::vector<double> gq(N);
  for (int t = 0; t < N; ++t) gq[t] = g_star(g, c.points.q[t], c.points, t);

  ApproxSolution s;
  s.M = M;
  s.ubar.resize(n);
  for (int i = 0; i < n; ++i)
    s.ubar(i) = (m(i) - 2.0) * std::log(c.eps[0]) - std::log(c.rho(i) * c.h.h(i, c.points.q[0])) -
                2.0 * kPi * m(i) * gq[0] + I(i);

  s.u.assign(n, Eigen::MatrixXd(M, M));
  s.label.resize(M, M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      const std::size_t idx = static_cast<std::size_t>(a) * M + b;
      const int t = table->nearest[idx];
      const double r = table->dist[idx];
      const double w = chi(r, c.tau);
      // Σ_s G(x, q_s) = G*(x; q_t) - (1/2π) ln r away from q_t
      const double gsum = r > 0 ? table->gstar[idx] - std::log(r) / (2.0 * kPi) : 0.0;
      s.label(a, b) = r <= c.tau ? t : (w > 0.0 ? N + t : -1);
      for (int i = 0; i < n; ++i) {
        const double outer = s.ubar(i) + 2.0 * kPi * m(i) * gsum;
        if (w == 0.0) {
          s.u[i](a, b) = outer;
          continue;
        }
        const double inner = inner_value(c, i, t, r, table->gstar[idx], gq[t]);
        s.u[i](a, b) = w == 1.0 ? inner : w * inner + (1.0 - w) * outer;
      }
    }
  s.mean.resize(n);
  for (int i = 0; i < n; ++i) s.mean(i) = s.u[i].mean();

  // boundary mismatch on ∂B_τ(q_t)
  s.mismatch = Eigen::MatrixXd::Zero(n, N);
  const int nb = 256;
  for (int t = 0; t < N; ++t)
    for (int k = 0; k < nb; ++k) {
      const double th = 2.0 * kPi * k / nb;
      const Vec2 x = c.points.q[t] + c.tau * Vec2(std::cos(th), std::sin(th));
      const double gs = g_star(g, x, c.points, t);
      const double gsum = gs - std::log(c.tau) / (2.0 * kPi);
      for (int i = 0; i < n; ++i) {
        const double d = std::abs(inner_value(c, i, t, c.tau, gs, gq[t]) - (s.ubar(i) + 2.0 * kPi * m(i) * gsum));
        s.mismatch(i, t) = std::max(s.mismatch(i, t), d);
      }
    }
  s.mismatch_sup = s.mismatch.maxCoeff();

  // polar quadrature of h e^{inner} over each disk
  std::vector<double> dens;
  std::vector<double> wts;
  const int nth = 64;
  for (int t = 0; t < N; ++t) {
    std::vector<double> lx, lw;
    gauss_panels(std::log(1e-6 * c.eps[t]), std::log(c.tau), 8, lx, lw);
    for (std::size_t p = 0; p < lx.size(); ++p) {
      const double r = std::exp(lx[p]);
      for (int q = 0; q < nth; ++q) {
        const double th = 2.0 * kPi * q / nth;
        const Vec2 x = c.points.q[t] + r * Vec2(std::cos(th), std::sin(th));
        const double gs = g_star(g, x, c.points, t);
        s.disk_x.push_back(x);
        wts.push_back(lw[p] * r * r * 2.0 * kPi / nth);
        for (int i = 0; i < n; ++i) dens.push_back(c.h.h(i, x) * std::exp(inner_value(c, i, t, r, gs, gq[t])));
      }
    }
  }
  const int nd = static_cast<int>(s.disk_x.size());
  s.disk_w = Eigen::Map<Eigen::VectorXd>(wts.data(), nd);
  s.disk_density = Eigen::Map<Eigen::MatrixXd>(dens.data(), n, nd);
  s.mass = s.disk_density * s.disk_w;
  const double cell = 1.0 / (double(M) * M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      if (s.label(a, b) >= 0 && s.label(a, b) < N) continue;
      const Vec2 x = node(a, b, M);
      for (int i = 0; i < n; ++i) s.mass(i) += cell * c.h.h(i, x) * std::exp(s.u[i](a, b));
    }
  return s;
}

ResidualReport residual(const BlowupConfig& c, const ApproxSolution& s, double mask) {
  const int n = c.n(), M = s.M;
  Spectral fft(M);
  ResidualReport rep;
  rep.mask = mask > 0 ? mask : 0.5 * c.tau;
  std::vector<Eigen::MatrixXd> dens(n, Eigen::MatrixXd(M, M));
  Eigen::VectorXd Z(n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) dens[i](a, b) = c.h.h(i, node(a, b, M)) * std::exp(s.u[i](a, b));
    Z(i) = dens[i].mean();
    rep.tail_fraction = std::max(rep.tail_fraction, fft.tail_fraction(dens[i]));
  }
  if (rep.tail_fraction > 1e-3)
    throw RefineGridError("aliasing: spectral tail fraction " + std::to_string(rep.tail_fraction));
  rep.l2 = Eigen::VectorXd::Zero(n);
  rep.sup = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd f = fft.neg_laplacian(s.u[i]);
    for (int j = 0; j < n; ++j) {
      if (c.A(i, j) == 0.0) continue;
      f -= c.A(i, j) * c.rho(j) * (dens[j] / Z(j) - Eigen::MatrixXd::Ones(M, M));
    }
    double l2 = 0;
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) {
        const Vec2 x = node(a, b, M);
        bool keep = true;
        for (const Vec2& q : c.points.q) keep = keep && torus_distance(x, q) >= rep.mask;
        if (!keep) continue;
        l2 += f(a, b) * f(a, b);
        rep.sup(i) = std::max(rep.sup(i), std::abs(f(a, b)));
      }
    rep.l2(i) = std::sqrt(l2 / (double(M) * M));
    rep.field.push_back(std::move(f));
  }
  return rep;
}

double plane_bubble_residual(const RadialBubble& b, double L, int M) {
  const int n = b.n();
  // C^∞ taper to the constant V(0.45L) between 0.3L and 0.45L keeps the periodic extension smooth;
  // the sup is taken on |x| <= L/4 where the field is untouched.
  auto bump = [](double s) { return s <= 0 ? 0.0 : std::exp(-1.0 / s); };
  auto taper = [&](double r) {
    const double s = (r - 0.3 * L) / (0.15 * L);
    return bump(1.0 - s) / (bump(1.0 - s) + bump(s));
  };
  Spectral fft(M);
  std::vector<Eigen::MatrixXd> V(n, Eigen::MatrixXd(M, M)), E(n, Eigen::MatrixXd(M, M));
  for (int a = 0; a < M; ++a)
    for (int c = 0; c < M; ++c) {
      const double x = L * (a < M / 2 ? a : a - M) / M, y = L * (c < M / 2 ? c : c - M) / M;
      const double r = std::hypot(x, y);
      const double w = taper(r);
      for (int i = 0; i < n; ++i) {
        V[i](a, c) = w * b.v(i, r) + (1.0 - w) * b.v(i, 0.45 * L);
        E[i](a, c) = std::exp(V[i](a, c));
      }
    }
  double sup = 0;
  for (int i = 0; i < n; ++i) {
    // the box has period L, the transform period 1
    Eigen::MatrixXd f = fft.neg_laplacian(V[i]) / (L * L);
    for (int j = 0; j < n; ++j) f -= b.coupling(i, j) * E[j];
    for (int a = 0; a < M; ++a)
      for (int c = 0; c < M; ++c) {
        const double x = L * (a < M / 2 ? a : a - M) / M, y = L * (c < M / 2 ? c : c - M) / M;
        if (std::hypot(x, y) <= L / 4) sup = std::max(sup, std::abs(f(a, c)));
      }
  }
  return sup;
}

namespace {

PohozaevResult pohozaev_once(const LocalFields& f, const Eigen::MatrixXd& Ainv, double R, int s, int nt, int M,
                             double r_min) {
  const PolarGrid grid(r_min, R, nt, M);
  PohozaevResult out;
  for (int k = 0; k < grid.K; ++k) {
    const double r = grid.r(k);
    for (int q = 0; q < M; ++q) {
      const double th = grid.theta(q);
      const Vec2 y = r * Vec2(std::cos(th), std::sin(th));
      for (int i = 0; i < f.n; ++i) out.volume += grid.weight(k) * f.grad_H(i, y)(s) * std::exp(f.v(i, y));
    }
  }
  for (int q = 0; q < M; ++q) {
    const double th = grid.theta(q);
    const Vec2 nu(std::cos(th), std::sin(th));
    const Vec2 y = R * nu;
    std::vector<Vec2> gv(f.n);
    double acc = 0;
    for (int i = 0; i < f.n; ++i) {
      gv[i] = f.grad_v(i, y);
      acc += nu(s) * f.H(i, y) * std::exp(f.v(i, y));
    }
    for (int i = 0; i < f.n; ++i)
      for (int j = 0; j < f.n; ++j) {
        if (Ainv(i, j) == 0.0) continue;
        acc += Ainv(i, j) * (gv[i](s) * gv[j].dot(nu) - 0.5 * gv[i].dot(gv[j]) * nu(s));
      }
    out.boundary += acc * R * 2.0 * kPi / M;
  }
  out.imbalance = out.volume - out.boundary;
  return out;
}

}  // namespace

PohozaevResult pohozaev_balance(const LocalFields& f, const CouplingMatrix& A, double R, int s,
                                const PohozaevOptions& opt) {
  if (!A.invertible()) throw StructuralError("Pohozaev balance needs an invertible coupling matrix");
  PohozaevResult fine = pohozaev_once(f, A.inverse(), R, s, opt.nt, opt.ntheta, opt.r_min);
  const PohozaevResult coarse = pohozaev_once(f, A.inverse(), R, s, opt.nt / 2, opt.ntheta / 2, opt.r_min);
  fine.quadrature_error = std::max(std::abs(fine.volume - coarse.volume), std::abs(fine.boundary - coarse.boundary));
  return fine;
}

LocalFields exact_fields(std::shared_ptr<const RadialBubble> b, const std::vector<Vec2>& beta) {
  LocalFields f;
  f.n = b->n();
  f.v = [b, beta](int i, const Vec2& y) { return b->v(i, y.norm()) + beta[i].dot(y); };
  f.grad_v = [b, beta](int i, const Vec2& y) -> Vec2 {
    const double r = y.norm();
    if (r == 0) return beta[i];
    return b->dv(i, r) * y / r + beta[i];
  };
  f.H = [beta](int i, const Vec2& y) { return std::exp(-beta[i].dot(y)); };
  f.grad_H = [beta](int i, const Vec2& y) -> Vec2 { return -beta[i] * std::exp(-beta[i].dot(y)); };
  return f;
}

LocalFields perturbed_fields(std::shared_ptr<const RadialBubble> b, const HLocalData& h, double eps, double r_out,
                             const FrequencyOptions& opt) {
  const int n = b->n();
  // without the projection the truncated disk lets an O(1) translation V' into c
  FrequencyOptions fo = opt;
  fo.projection = FrequencyOptions::Projection::Always;
  std::array<std::shared_ptr<const CorrectionProfile>, 2> c;
  for (int s = 0; s < 2; ++s) {
    bool any = false;
    for (int i = 0; i < n; ++i) any = any || h.grad[i](s) != 0.0;
    if (any) c[s] = std::make_shared<const CorrectionProfile>(solve_frequency(*b, 1, first_order_source(*b, h, eps, s), r_out, fo));
  }
  auto grads = std::make_shared<std::vector<Vec2>>(h.grad);
  LocalFields f;
  f.n = n;
  f.v = [b, c](int i, const Vec2& y) {
    const double r = y.norm();
    double v = b->v(i, r);
    if (r > 0) {
      if (c[0]) v += c[0]->value(i, r) * y(0) / r;
      if (c[1]) v += c[1]->value(i, r) * y(1) / r;
    }
    return v;
  };
  f.grad_v = [b, c](int i, const Vec2& y) -> Vec2 {
    const double r = y.norm();
    if (r == 0) return Vec2::Zero();
    const Vec2 er = y / r, et(-er(1), er(0));
    Vec2 gv = b->dv(i, r) * er;
    for (int s = 0; s < 2; ++s) {
      if (!c[s]) continue;
      const double g = c[s]->value(i, r), dg = c[s]->derivative(i, r);
      // angular factor cos θ (s = 0) or sin θ (s = 1)
      const double ang = er(s), dang = s == 0 ? -er(1) : er(0);
      gv += dg * ang * er + (g / r) * dang * et;
    }
    return gv;
  };
  f.H = [grads, eps](int i, const Vec2& y) { return 1.0 + eps * (*grads)[i].dot(y); };
  f.grad_H = [grads, eps](int i, const Vec2&) -> Vec2 { return eps * (*grads)[i]; };
  return f;
}

LocationReport location_check(const TorusGreen& g, const PointConfig& points, const Eigen::VectorXd& rho,
                              const Eigen::VectorXd& m, const HField& h) {
  LocationReport r;
  r.se1 = se1_residual(g, points, rho, m, h);
  r.grad_f = f_functional(g, points, rho, m, h).gradient;
  r.max_diff = (r.se1 - r.grad_f).cwiseAbs().maxCoeff();
  return r;
}

Eigen::VectorXd global_cancellation(const BlowupConfig& c, const ApproxSolution& s,
                                    const std::function<double(int, const Vec2&)>& xi) {
  const int n = c.n(), M = s.M, N = c.N();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < s.disk_w.size(); ++k)
    for (int j = 0; j < n; ++j) w(j) += s.disk_w(k) * s.disk_density(j, k) * xi(j, s.disk_x[k]);
  const double cell = 1.0 / (double(M) * M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      if (s.label(a, b) >= 0 && s.label(a, b) < N) continue;
      const Vec2 x = node(a, b, M);
      for (int j = 0; j < n; ++j) w(j) += cell * c.h.h(j, x) * std::exp(s.u[j](a, b)) * xi(j, x);
    }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    out(i) = 0;
    for (int j = 0; j < n; ++j) out(i) += c.A(i, j) * c.rho(j) * w(j);
  }
  return out;
}

}  // namespace liouville

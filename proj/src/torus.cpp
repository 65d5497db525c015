#include "liouville/torus.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "liouville/errors.hpp"

namespace liouville {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;

double e1(double z) { return boost::math::expint(1, z); }

// Ein(z) = ∫_0^z (1 - e^{-u})/u du = E1(z) + ln z + γ_E
double ein(double z) {
  if (z < 2.0) {
    double term = z, sum = z;
    for (int k = 2; k < 60; ++k) {
      term *= -z / k;
      const double add = term / k;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return e1(z) + std::log(z) + kEulerGamma;
}

// g(z) = (1 - e^{-z})/z and g'(z)
void gfun(double z, double* g, double* dg) {
  if (z < 1e-3) {
    *g = 1 - z / 2 + z * z / 6 - z * z * z / 24;
    *dg = -0.5 + z / 3 - z * z / 8 + z * z * z / 30;
    return;
  }
  const double em = -std::expm1(-z);
  *g = em / z;
  *dg = (z * std::exp(-z) - em) / (z * z);
}
}  // namespace

Vec2 wrap(const Vec2& x) {
  Vec2 d;
  for (int k = 0; k < 2; ++k) d[k] = x[k] - std::floor(x[k] + 0.5);
  return d;
}

double torus_distance(const Vec2& x, const Vec2& y) { return wrap(x - y).norm(); }

TorusGreen::TorusGreen(double split, double cutoff) : s_(split), cutoff_(cutoff) {
  if (split <= 0) throw ConfigurationError("Ewald split parameter must be positive");
  nreal_ = static_cast<int>(std::ceil(std::sqrt(4 * s_ * cutoff_) + 0.5));
  nrecip_ = static_cast<int>(std::ceil(std::sqrt(cutoff_ / (4 * kPi * kPi * s_))));
  double v;
  real_sum(Vec2::Zero(), true, &v, nullptr, nullptr);
  double w;
  recip_sum(Vec2::Zero(), &w, nullptr, nullptr);
  gamma0_ = v + w - s_ + (std::log(4 * s_) - kEulerGamma) / (4 * kPi);
}

void TorusGreen::real_sum(const Vec2& d, bool skip_origin, double* val, Vec2* grad, Mat2* hess) const {
  double v = 0;
  Vec2 g = Vec2::Zero();
  Mat2 H = Mat2::Zero();
  for (int n1 = -nreal_; n1 <= nreal_; ++n1)
    for (int n2 = -nreal_; n2 <= nreal_; ++n2) {
      if (skip_origin && n1 == 0 && n2 == 0) continue;
      const Vec2 y(d[0] - n1, d[1] - n2);
      const double y2 = y.squaredNorm();
      const double z = y2 / (4 * s_);
      if (z > cutoff_) continue;
      v += e1(z) / (4 * kPi);
      if (grad || hess) {
        const double ez = std::exp(-z);
        if (grad) g -= ez * y / (2 * kPi * y2);
        if (hess)
          H -= (ez / (2 * kPi)) * (Mat2::Identity() / y2 - 2 * y * y.transpose() / (y2 * y2) -
                                   y * y.transpose() / (2 * s_ * y2));
      }
    }
  *val = v;
  if (grad) *grad = g;
  if (hess) *hess = H;
}

void TorusGreen::recip_sum(const Vec2& d, double* val, Vec2* grad, Mat2* hess) const {
  double v = 0;
  Vec2 g = Vec2::Zero();
  Mat2 H = Mat2::Zero();
  const double kmax2 = cutoff_ / (4 * kPi * kPi * s_);
  for (int k1 = -nrecip_; k1 <= nrecip_; ++k1)
    for (int k2 = -nrecip_; k2 <= nrecip_; ++k2) {
      const double k2n = k1 * k1 + k2 * k2;
      if (k2n == 0 || k2n > kmax2) continue;
      const Vec2 k(k1, k2);
      const double w = std::exp(-4 * kPi * kPi * k2n * s_) / k2n;
      const double ph = 2 * kPi * k.dot(d);
      v += w * std::cos(ph) / (4 * kPi * kPi);
      if (grad) g -= w * std::sin(ph) * k / (2 * kPi);
      if (hess) H -= w * std::cos(ph) * k * k.transpose();
    }
  *val = v;
  if (grad) *grad = g;
  if (hess) *hess = H;
}

double TorusGreen::green(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  if (d.squaredNorm() < 1e-300) throw SingularEvaluationError("green evaluated at x = q; use regular_part");
  double a, b;
  real_sum(d, false, &a, nullptr, nullptr);
  recip_sum(d, &b, nullptr, nullptr);
  return a + b - s_;
}

Vec2 TorusGreen::grad_green_1(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  if (d.squaredNorm() < 1e-300) throw SingularEvaluationError("green gradient evaluated at x = q");
  double a, b;
  Vec2 ga, gb;
  real_sum(d, false, &a, &ga, nullptr);
  recip_sum(d, &b, &gb, nullptr);
  return ga + gb;
}

Mat2 TorusGreen::hess_green_11(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  if (d.squaredNorm() < 1e-300) throw SingularEvaluationError("green Hessian evaluated at x = q");
  double a, b;
  Mat2 ha, hb;
  real_sum(d, false, &a, nullptr, &ha);
  recip_sum(d, &b, nullptr, &hb);
  return ha + hb;
}

double TorusGreen::regular_part(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  double a, b;
  real_sum(d, true, &a, nullptr, nullptr);
  recip_sum(d, &b, nullptr, nullptr);
  const double z = d.squaredNorm() / (4 * s_);
  return a + b - s_ + (ein(z) - kEulerGamma + std::log(4 * s_)) / (4 * kPi);
}

Vec2 TorusGreen::grad_regular_1(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  double a, b;
  Vec2 ga, gb;
  real_sum(d, true, &a, &ga, nullptr);
  recip_sum(d, &b, &gb, nullptr);
  double g, dg;
  gfun(d.squaredNorm() / (4 * s_), &g, &dg);
  return ga + gb + g * d / (8 * kPi * s_);
}

Mat2 TorusGreen::hess_regular_11(const Vec2& x, const Vec2& q) const {
  const Vec2 d = wrap(x - q);
  double a, b;
  Mat2 ha, hb;
  real_sum(d, true, &a, nullptr, &ha);
  recip_sum(d, &b, nullptr, &hb);
  double g, dg;
  gfun(d.squaredNorm() / (4 * s_), &g, &dg);
  return ha + hb + (g * Mat2::Identity() + dg * d * d.transpose() / (2 * s_)) / (8 * kPi * s_);
}

double green_mean(const TorusGreen& g, const Vec2& q, int nodes) {
  using Rule = boost::math::quadrature::gauss<double, 40>;
  const auto& xs = Rule::abscissa();
  const auto& ws = Rule::weights();
  // symmetric nodes on [-1, 1]
  std::vector<double> x, w;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    x.push_back(xs[k]);
    w.push_back(ws[k]);
    if (xs[k] != 0) {
      x.push_back(-xs[k]);
      w.push_back(ws[k]);
    }
  }
  const int panels = std::max(1, nodes / 40);
  double sum = 0;
  for (int side = 0; side < 4; ++side)
    for (int p = 0; p < panels; ++p) {
      const double a = -kPi / 4 + side * kPi / 2 + p * (kPi / 2) / panels;
      const double b = a + (kPi / 2) / panels;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double th = 0.5 * (a + b) + 0.5 * (b - a) * x[i];
        const double R = 0.5 / std::max(std::abs(std::cos(th)), std::abs(std::sin(th)));
        double inner = R * R / 2 * std::log(R) - R * R / 4;
        inner *= -1.0 / (2 * kPi);
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double r = 0.5 * R * (1 + x[k]);
          inner += 0.5 * R * w[k] * r * g.regular_part(q + r * Vec2(std::cos(th), std::sin(th)), q);
        }
        sum += 0.5 * (b - a) * w[i] * inner;
      }
    }
  return sum;
}

double green_fourier(const Vec2& dd, int modes) {
  Vec2 d = wrap(dd);
  // sum in closed form along the axis with the larger separation
  double x = std::abs(d[0]), y = d[1];
  if (std::abs(d[1]) > x) {
    x = std::abs(d[1]);
    y = d[0];
  }
  // Σ_{k≠0} cos(2πkx)/k² = 2π² (x² - x + 1/6)
  double sum = 2 * kPi * kPi * (x * x - x + 1.0 / 6.0);
  const int K = modes / 2;
  for (int k = 1; k <= K; ++k) {
    // Σ_j cos(2πjx)/(j² + k²) = (π/k) cosh(πk(1-2x))/sinh(πk)
    const double inner = (kPi / k) * (std::exp(-2 * kPi * k * x) + std::exp(-2 * kPi * k * (1 - x))) /
                         (-std::expm1(-2 * kPi * k));
    sum += 2 * std::cos(2 * kPi * k * y) * inner;
  }
  return sum / (4 * kPi * kPi);
}

HField HField::constant(int n, double value) {
  std::vector<LogFourier> c(n);
  for (auto& x : c) x.c0 = std::log(value);
  return HField(c);
}

double HField::ln_h(int i, const Vec2& x) const {
  const auto& c = comps_[i];
  double v = c.c0;
  for (const auto& m : c.modes) {
    const double ph = 2 * kPi * (m.k1 * x[0] + m.k2 * x[1]);
    v += m.c * std::cos(ph) + m.s * std::sin(ph);
  }
  return v;
}

double HField::h(int i, const Vec2& x) const { return std::exp(ln_h(i, x)); }

Vec2 HField::grad_ln_h(int i, const Vec2& x) const {
  Vec2 g = Vec2::Zero();
  for (const auto& m : comps_[i].modes) {
    const Vec2 k(2 * kPi * m.k1, 2 * kPi * m.k2);
    const double ph = k.dot(x);
    g += (-m.c * std::sin(ph) + m.s * std::cos(ph)) * k;
  }
  return g;
}

Mat2 HField::hess_ln_h(int i, const Vec2& x) const {
  Mat2 H = Mat2::Zero();
  for (const auto& m : comps_[i].modes) {
    const Vec2 k(2 * kPi * m.k1, 2 * kPi * m.k2);
    const double ph = k.dot(x);
    H -= (m.c * std::cos(ph) + m.s * std::sin(ph)) * k * k.transpose();
  }
  return H;
}

double HField::min_on_grid(int i, int grid) const {
  double mn = INFINITY;
  for (int a = 0; a < grid; ++a)
    for (int b = 0; b < grid; ++b) mn = std::min(mn, h(i, Vec2(double(a) / grid, double(b) / grid)));
  return mn;
}

HField HField::translated(const Vec2& shift) const {
  auto c = comps_;
  for (auto& comp : c)
    for (auto& m : comp.modes) {
      // f(x - shift)
      const double ph = 2 * kPi * (m.k1 * shift[0] + m.k2 * shift[1]);
      const double cc = m.c * std::cos(ph) - m.s * std::sin(ph);
      const double ss = m.c * std::sin(ph) + m.s * std::cos(ph);
      m.c = cc;
      m.s = ss;
    }
  return HField(c);
}

HField HField::scaled(int i, double c) const {
  auto comps = comps_;
  comps[i].c0 += std::log(c);
  return HField(comps);
}

double PointConfig::d_min() const {
  double d = INFINITY;
  for (int a = 0; a < N(); ++a)
    for (int b = a + 1; b < N(); ++b) d = std::min(d, torus_distance(q[a], q[b]));
  return d;
}

void PointConfig::require_distinct(double tol) const {
  if (N() > 1 && d_min() <= tol) throw DistinctnessError("blowup points must be pairwise distinct");
}

double g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t) {
  double v = g.regular_part(x, c.q[t]);
  for (int s = 0; s < c.N(); ++s)
    if (s != t) v += g.green(x, c.q[s]);
  return v;
}

Vec2 grad_1_g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t) {
  Vec2 v = g.grad_regular_1(x, c.q[t]);
  for (int s = 0; s < c.N(); ++s)
    if (s != t) v += g.grad_green_1(x, c.q[s]);
  return v;
}

Mat2 hess_1_g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t) {
  Mat2 v = g.hess_regular_11(x, c.q[t]);
  for (int s = 0; s < c.N(); ++s)
    if (s != t) v += g.hess_green_11(x, c.q[s]);
  return v;
}

FValue f_functional(const TorusGreen& g, const PointConfig& c, const Eigen::VectorXd& rho, const Eigen::VectorXd& m,
                    const HField& h) {
  c.require_distinct();
  const int N = c.N(), n = static_cast<int>(rho.size());
  double cc = 0;
  for (int i = 0; i < n; ++i) cc += rho[i] * kPi * m[i];
  FValue out;
  out.gradient = Eigen::VectorXd::Zero(2 * N);
  out.hessian = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  double v = 0;
  for (int t = 0; t < N; ++t) {
    for (int i = 0; i < n; ++i) {
      v += rho[i] * h.ln_h(i, c.q[t]);
      out.gradient.segment<2>(2 * t) += rho[i] * h.grad_ln_h(i, c.q[t]);
      out.hessian.block<2, 2>(2 * t, 2 * t) += rho[i] * h.hess_ln_h(i, c.q[t]);
    }
    v += cc * g.robin();
    for (int s = 0; s < N; ++s) {
      if (s == t) continue;
      v += cc * g.green(c.q[t], c.q[s]);
      out.gradient.segment<2>(2 * t) += 2 * cc * g.grad_green_1(c.q[t], c.q[s]);
      const Mat2 H = g.hess_green_11(c.q[t], c.q[s]);
      out.hessian.block<2, 2>(2 * t, 2 * t) += 2 * cc * H;
      out.hessian.block<2, 2>(2 * t, 2 * s) -= 2 * cc * H;
    }
  }
  out.value = v;
  return out;
}

Eigen::VectorXd se1_residual(const TorusGreen& g, const PointConfig& c, const Eigen::VectorXd& rho,
                             const Eigen::VectorXd& m, const HField& h) {
  c.require_distinct();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * c.N());
  for (int t = 0; t < c.N(); ++t) {
    const Vec2 gs = grad_1_g_star(g, c.q[t], c, t);
    for (int i = 0; i < rho.size(); ++i) r.segment<2>(2 * t) += rho[i] * (h.grad_ln_h(i, c.q[t]) + 2 * kPi * m[i] * gs);
  }
  return r;
}

CriticalResult find_critical(const TorusGreen& g, const PointConfig& init, const Eigen::VectorXd& rho,
                             const Eigen::VectorXd& m, const HField& h, const CriticalOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-opt.jitter, opt.jitter);
  const int N = init.N();
  for (int start = 0; start < opt.starts; ++start) {
    PointConfig c = init;
    if (start > 0)
      for (auto& q : c.q) q += Vec2(U(rng), U(rng));
    try {
      for (int it = 0; it <= opt.max_iter; ++it) {
        FValue f = f_functional(g, c, rho, m, h);
        const double gn = f.gradient.norm();
        if (!std::isfinite(gn)) break;
        if (gn <= opt.grad_tol) {
          CriticalResult res;
          for (auto& q : c.q) q = wrap(q);
          res.config = c;
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (f.hessian + f.hessian.transpose()));
          res.eigenvalues = es.eigenvalues();
          const double hn = res.eigenvalues.cwiseAbs().maxCoeff();
          res.nondegenerate = hn > 0 && res.eigenvalues.cwiseAbs().minCoeff() > 1e-8 * hn;
          res.grad_norm = gn;
          res.iterations = it;
          res.start_used = start;
          return res;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.hessian, Eigen::ComputeFullU | Eigen::ComputeFullV);
        svd.setThreshold(1e-10);
        Eigen::VectorXd step = -svd.solve(f.gradient);
        // backtrack on the gradient norm
        double lam = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 20; ++ls, lam *= 0.5) {
          PointConfig trial = c;
          for (int t = 0; t < N; ++t) trial.q[t] += lam * step.segment<2>(2 * t);
          if (trial.N() > 1 && trial.d_min() < 1e-6) continue;
          const double tn = f_functional(g, trial, rho, m, h).gradient.norm();
          if (tn < gn) {
            c = trial;
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
    } catch (const DistinctnessError&) {
    }
  }
  throw MultistartExhaustionError("Newton failed to reach a critical point from every start");
}

}  // namespace liouville

#include "liouville/fredholm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "liouville/errors.hpp"

namespace liouville {

namespace {

double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

// e^{-2t}(f_tt - ℓ² f) with the regular ghost f_{-1} = f_1 - 2hℓ f_0 at the inner node.
// At the outer node a one-sided 4-point second difference.
Eigen::VectorXd lap_row(const FredholmGrid& g, int l, const Eigen::VectorXd& f) {
  const int K = g.K;
  const double h = g.h();
  Eigen::VectorXd out(K + 1);
  for (int k = 0; k <= K; ++k) {
    double ftt;
    if (k == 0) {
      const double ghost = f(1) - 2.0 * h * l * f(0);
      ftt = (f(1) - 2.0 * f(0) + ghost) / (h * h);
    } else if (k == K) {
      ftt = (2.0 * f(K) - 5.0 * f(K - 1) + 4.0 * f(K - 2) - f(K - 3)) / (h * h);
    } else {
      ftt = (f(k + 1) - 2.0 * f(k) + f(k - 1)) / (h * h);
    }
    out(k) = std::exp(-2.0 * g.t(k)) * (ftt - l * l * f(k));
  }
  return out;
}

// Dirichlet (node K = 0) frequency-1 Laplacian on nodes 0..K-1.
Eigen::MatrixXd dirichlet_lap(const FredholmGrid& g) {
  const int K = g.K;
  const double h = g.h();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    const double s = std::exp(-2.0 * g.t(k));
    D(k, k) = s * (-2.0 / (h * h) - 1.0);
    if (k + 1 < K) D(k, k + 1) += s / (h * h);
    if (k == 0) {
      D(0, 1) += s / (h * h);
      D(0, 0) += -s * 2.0 * h / (h * h);
    } else {
      D(k, k - 1) += s / (h * h);
    }
  }
  return D;
}

struct Sigmas {
  double constrained = 0.0, unconstrained = 0.0;
};

// Smallest singular value of S relative to the X-norm Gram G: min ‖Sx‖ / sqrt(xᵀGx).
double sigma_min_relative(const Eigen::MatrixXd& S, const Eigen::MatrixXd& G) {
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw NonConvergenceError("X-norm Gram is not positive definite");
  // C = S L^{-T}
  Eigen::MatrixXd C = llt.matrixU().transpose().solve(S.transpose()).transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(C);
  return svd.singularValues().minCoeff();
}

Sigmas frequency1_sigmas(const RadialBubble& b, const HLocalData& h, double eps, double tau, double t1, int K,
                         const InvertibilityOptions& opt) {
  const int n = b.n();
  const FredholmGrid g = FredholmGrid::make(eps, tau, K, opt.r_min);
  const Eigen::MatrixXd& Ainv = b.coupling.inverse();
  const Eigen::MatrixXd D = dirichlet_lap(g);
  const int N = n * K;
  auto id = [n](int i, int k) { return k * n + i; };

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd Dblk = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd wq(N), wy(N), wx(N), z(N), ez(N);
  Eigen::VectorXd sg(n);
  for (int i = 0; i < n; ++i) sg(i) = sgn(h.grad[i](0));
  for (int k = 0; k < K; ++k) {
    const double r = g.r(k);
    const double x = eps * r;
    const double w = M_PI * g.weight(k) * r * r;
    for (int i = 0; i < n; ++i) {
      const double ev = b.ev(i, r);
      const double rb = rho_beta(r, opt.beta), rt = rho_tilde_beta(r, opt.beta);
      wq(id(i, k)) = w;
      wy(id(i, k)) = w * rb * rb;
      wx(id(i, k)) = w * rt * rt;
      z(id(i, k)) = b.dv(i, r) * (chi(x, tau) + t1 * chi_star(x, tau) * sg(i));
      ez(id(i, k)) = ev * z(id(i, k));
      L(id(i, k), id(i, k)) += h.value(i) * ev;
    }
  }
  for (int k = 0; k < K; ++k)
    for (int kk = std::max(0, k - 1); kk <= std::min(K - 1, k + 1); ++kk) {
      if (D(k, kk) == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        Dblk(id(i, k), id(i, kk)) = D(k, kk);
        for (int j = 0; j < n; ++j) L(id(i, k), id(j, kk)) += Ainv(i, j) * D(k, kk);
      }
    }

  const Eigen::VectorXd sy = wy.cwiseSqrt();
  const Eigen::MatrixXd G = Dblk.transpose() * sy.cwiseAbs2().asDiagonal() * Dblk + Eigen::MatrixXd(wx.asDiagonal());

  Sigmas out;
  if (opt.unconstrained) out.unconstrained = sigma_min_relative(sy.asDiagonal() * L, G);

  // Y = Δ(A^{-1} Z_ε); E is the orthogonal complement of wq ⊙ Y
  Eigen::VectorXd zc(N);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += Ainv(i, j) * z(id(j, k));
      zc(id(i, k)) = s;
    }
  const Eigen::VectorXd Y = Dblk * zc;
  const Eigen::VectorXd c = wq.cwiseProduct(Y);
  if (c.norm() == 0.0) throw DegenerateProjectionError("E-constraint vector vanishes");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(c.normalized()));
  const Eigen::MatrixXd B = (qr.householderQ() * Eigen::MatrixXd::Identity(N, N)).rightCols(N - 1);

  const Eigen::VectorXd wz = wq.cwiseProduct(z);
  const double denom = wz.dot(ez);
  if (std::abs(denom) < 1e-14 * wz.norm() * ez.norm()) throw DegenerateProjectionError("Q Gram is singular");
  // P = I - ez wzᵀ / (wzᵀ ez)
  Eigen::MatrixXd LB = L * B;
  const Eigen::RowVectorXd coef = (wz.transpose() * LB) / denom;
  LB -= ez * coef;
  out.constrained = sigma_min_relative(sy.asDiagonal() * LB, B.transpose() * G * B);
  return out;
}

}  // namespace

double chi(double x, double tau) { return 1.0 - smoothstep((std::abs(x) - tau) / tau); }

double chi_star(double x, double tau) {
  const double a = std::abs(x);
  const double w = tau / 3.0;
  if (a <= 2.0 * tau || a >= 3.0 * tau) return 0.0;
  if (a < 7.0 * w) return smoothstep((a - 2.0 * tau) / w);
  if (a > 8.0 * w) return 1.0 - smoothstep((a - 8.0 * w) / w);
  return 1.0;
}

FredholmGrid FredholmGrid::make(double eps, double tau, int K, double r_min) {
  if (eps <= 0.0 || tau <= 0.0 || K < 8) throw ConfigurationError("fredholm grid needs eps, tau > 0 and K >= 8");
  FredholmGrid g;
  g.t0 = std::log(r_min);
  g.t1 = std::log(3.0 * tau / eps);
  g.K = K;
  if (g.t1 <= g.t0) throw ConfigurationError("outer radius 3τ/ε below r_min");
  return g;
}

double FredholmGrid::r(int k) const { return std::exp(t(k)); }

double FredholmGrid::weight(int k) const { return (k == 0 || k == K) ? 0.5 * h() : h(); }

Eigen::MatrixXd WeightedField::laplacian() const {
  Eigen::MatrixXd out(u.rows(), u.cols());
  for (int i = 0; i < u.rows(); ++i) out.row(i) = lap_row(grid, l, u.row(i).transpose()).transpose();
  return out;
}

double rho_beta(double r, double beta) { return std::pow(1.0 + r, 1.0 + beta / 2.0); }

double rho_tilde_beta(double r, double beta) {
  return 1.0 / ((1.0 + r) * std::pow(std::log(2.0 + r), 1.0 + beta / 2.0));
}

WeightedNorms weighted_norms(const WeightedField& f) {
  const FredholmGrid& g = f.grid;
  const double ang = f.l == 0 ? 2.0 * M_PI : M_PI;
  const Eigen::MatrixXd lap = f.laplacian();
  double x2 = 0.0, y2 = 0.0;
  for (int k = 0; k <= g.K; ++k) {
    const double r = g.r(k);
    const double w = ang * g.weight(k) * r * r;
    const double rb = rho_beta(r, f.beta), rt = rho_tilde_beta(r, f.beta);
    for (int i = 0; i < f.u.rows(); ++i) {
      y2 += w * std::pow(f.u(i, k) * rb, 2);
      x2 += w * (std::pow(lap(i, k) * rb, 2) + std::pow(f.u(i, k) * rt, 2));
    }
  }
  return {std::sqrt(x2), std::sqrt(y2)};
}

double ModifiedKernelSet::radial(int s, int i, double r) const {
  const double x = eps * r;
  return bubble->dv(i, r) * (chi(x, tau) + t[s] * chi_star(x, tau) * sign[s](i));
}

PolarField ModifiedKernelSet::sample(int s, const PolarGrid& g) const {
  const int n = bubble->n();
  PolarField f(n, Eigen::MatrixXd(g.K, g.M));
  for (int k = 0; k < g.K; ++k)
    for (int i = 0; i < n; ++i) {
      const double rad = radial(s, i, g.r(k));
      for (int m = 0; m < g.M; ++m) f[i](k, m) = rad * (s == 0 ? std::cos(g.theta(m)) : std::sin(g.theta(m)));
    }
  return f;
}

std::array<double, 2> solve_orthogonality(const RadialBubble& b, const HLocalData& h, double eps, double tau) {
  // Σ_i ∂_s h_i J_i + t Σ_i |∂_s h_i| J*_i = 0 with J = π∫ r² e^{V} V' χ dr, J* the same with χ_*.
  const int n = b.n();
  const int steps = 4000;
  std::array<double, 2> out{0.0, 0.0};
  Eigen::VectorXd J(n), Js(n);
  const double r_min = 1e-6;
  for (int i = 0; i < n; ++i) {
    // Simpson in t = ln r; χ_* is supported on [2τ/ε, 3τ/ε]
    auto integrate = [&](double a, double c, auto cut) {
      const double ta = std::log(a), tc = std::log(c), dt = (tc - ta) / steps;
      double s = 0.0;
      for (int k = 0; k <= steps; ++k) {
        const double r = std::exp(ta + k * dt);
        const double wk = (k == 0 || k == steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += wk * r * r * r * b.ev(i, r) * b.dv(i, r) * cut(eps * r);
      }
      return M_PI * s * dt / 3.0;
    };
    J(i) = integrate(r_min, 2.0 * tau / eps, [tau](double x) { return chi(x, tau); });
    Js(i) = integrate(2.0 * tau / eps, 3.0 * tau / eps, [tau](double x) { return chi_star(x, tau); });
  }
  for (int s = 0; s < 2; ++s) {
    double lin = 0.0, coef = 0.0, scale = 0.0;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      const double d = h.value(i) * h.grad[i](s);
      if (d != 0.0) any = true;
      lin += d * J(i);
      coef += std::abs(d) * Js(i);
      scale = std::max(scale, std::abs(d));
    }
    if (!any) continue;
    if (std::abs(coef) < 1e-12 * scale) throw DegenerateCutoffError("annulus coefficient of t vanishes");
    out[s] = -lin / coef;
  }
  return out;
}

ModifiedKernelSet modified_kernels(const RadialBubble& b, const HLocalData& h, double eps, double tau) {
  ModifiedKernelSet Z;
  Z.bubble = &b;
  Z.eps = eps;
  Z.tau = tau;
  Z.t = solve_orthogonality(b, h, eps, tau);
  for (int s = 0; s < 2; ++s) {
    Z.sign[s].resize(b.n());
    for (int i = 0; i < b.n(); ++i) Z.sign[s](i) = sgn(h.grad[i](s));
  }
  return Z;
}

double pair_kernel(const PolarField& u, const PolarGrid& g, const ModifiedKernelSet& Z, int s) {
  return pair(g, u, Z.sample(s, g));
}

PolarField project_Q(const PolarField& u, const PolarGrid& g, const ModifiedKernelSet& Z) {
  const int n = Z.bubble->n();
  std::array<PolarField, 2> zs{Z.sample(0, g), Z.sample(1, g)};
  std::array<PolarField, 2> ezs = zs;
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < g.K; ++k) ezs[s][i].row(k) *= Z.bubble->ev(i, g.r(k));
  Eigen::Matrix2d G;
  Eigen::Vector2d p;
  for (int a = 0; a < 2; ++a) {
    p(a) = pair(g, u, zs[a]);
    for (int c = 0; c < 2; ++c) G(a, c) = pair(g, ezs[c], zs[a]);
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(G);
  const auto sv = svd.singularValues();
  if (sv(1) <= 1e-12 * sv(0)) throw DegenerateProjectionError("Gram matrix of the correction directions is singular");
  const Eigen::Vector2d r = G.fullPivLu().solve(p);
  PolarField out = u;
  for (int i = 0; i < n; ++i) out[i] -= r(0) * ezs[0][i] + r(1) * ezs[1][i];
  return out;
}

double projection_idempotency(const RadialBubble& b, const HLocalData& h, double eps, double tau,
                              std::uint64_t seed) {
  const ModifiedKernelSet Z = modified_kernels(b, h, eps, tau);
  const PolarGrid g(1e-3, 3 * tau / eps, 801, 64);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  // a few low modes with random amplitudes, tapered at the outer circle
  PolarField u(b.n(), Eigen::MatrixXd(g.K, g.M));
  for (int i = 0; i < b.n(); ++i) {
    double c[3][2];
    for (auto& row : c) row[0] = normal(rng), row[1] = normal(rng);
    for (int k = 0; k < g.K; ++k) {
      const double r = g.r(k), w = r / (1 + r * r) * chi(eps * r, tau);
      for (int m = 0; m < g.M; ++m) {
        const double th = g.theta(m);
        u[i](k, m) = w * (c[0][0] + c[1][0] * std::cos(th) + c[1][1] * std::sin(th) + c[2][0] * std::cos(2 * th) +
                          c[2][1] * std::sin(2 * th)) + c[0][1] * w * w;
      }
    }
  }
  const PolarField q1 = project_Q(u, g, Z);
  const PolarField q2 = project_Q(q1, g, Z);
  PolarField d = q2;
  for (int i = 0; i < b.n(); ++i) d[i] -= q1[i];
  return std::sqrt(pair(g, d, d) / pair(g, q1, q1));
}

std::vector<InvertibilityResult> invertibility_check(const RadialBubble& b, const HLocalData& h,
                                                     const std::vector<double>& eps_list, double tau,
                                                     const InvertibilityOptions& opt) {
  std::vector<InvertibilityResult> out;
  for (double eps : eps_list) {
    if (eps < 1e-3 || eps > 1e-1) throw ConfigurationError("eps outside [1e-3, 1e-1]");
    InvertibilityResult res;
    res.eps = eps;
    res.t = solve_orthogonality(b, h, eps, tau);
    int K = opt.K0;
    Sigmas prev = frequency1_sigmas(b, h, eps, tau, res.t[0], K, opt);
    bool ok = false;
    for (int d = 0; d < opt.max_doublings; ++d) {
      K *= 2;
      const Sigmas cur = frequency1_sigmas(b, h, eps, tau, res.t[0], K, opt);
      res.change = std::abs(cur.constrained - prev.constrained) / cur.constrained;
      prev = cur;
      if (res.change <= opt.rel_change) {
        ok = true;
        break;
      }
    }
    if (!ok) throw RefineGridError("sigma_min not converged under grid doubling");
    res.sigma_min = prev.constrained;
    res.sigma_min_unconstrained = prev.unconstrained;
    res.K = K;
    out.push_back(res);
  }
  return out;
}

}  // namespace liouville

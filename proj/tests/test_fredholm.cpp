#include "doctest.h"

#include <cmath>
#include <numbers>

#include "liouville/errors.hpp"
#include "liouville/fredholm.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

const RadialBubble& pair_bubble() {
  static const RadialBubble b = [] {
    Eigen::Matrix2d a;
    a << 1, 2, 2, 1;
    return solve_radial(CouplingMatrix(a), Eigen::Vector2d(0, 0), 200);
  }();
  return b;
}

HLocalData opposing() {
  HLocalData h = HLocalData::constant(2);
  h.grad = {Vec2(2, 0.5), Vec2(-1, 0.25)};
  return h;
}

}  // namespace

TEST_CASE("cutoff functions") {
  const double tau = 0.2;
  CHECK(chi(0, tau) == 1.0);
  CHECK(chi(tau, tau) == 1.0);
  CHECK(chi(1.5 * tau, tau) == doctest::Approx(0.5));
  CHECK(chi(2 * tau, tau) == 0.0);
  CHECK(chi(-0.5 * tau, tau) == 1.0);
  CHECK(chi_star(2 * tau, tau) == 0.0);
  CHECK(chi_star(2.5 * tau, tau) == 1.0);
  CHECK(chi_star(7 * tau / 3, tau) == doctest::Approx(1.0));
  CHECK(chi_star(8 * tau / 3, tau) == doctest::Approx(1.0));
  CHECK(chi_star(3 * tau, tau) == 0.0);
  CHECK(chi_star(13 * tau / 6, tau) == doctest::Approx(0.5));
  // C²: one-sided second differences vanish at the joins
  // (a jump in χ'' would leave them O(1/τ²) = 25; a C² join gives O(h/τ³))
  const double h = 1e-5;
  for (double x : {tau, 2 * tau}) {
    CHECK(std::abs(chi(x + 2 * h, tau) - 2 * chi(x + h, tau) + chi(x, tau)) / (h * h) <= 1e4 * h);
    CHECK(std::abs(chi(x, tau) - 2 * chi(x - h, tau) + chi(x - 2 * h, tau)) / (h * h) <= 1e4 * h);
  }
}

TEST_CASE("weight functions") {
  CHECK(rho_beta(0, 0.1) == 1.0);
  CHECK(rho_beta(3, 0.1) == doctest::Approx(std::pow(4.0, 1.05)));
  CHECK(rho_tilde_beta(0, 0.1) == doctest::Approx(1 / std::pow(std::log(2.0), 1.05)));
  CHECK(rho_tilde_beta(10, 0.2) == doctest::Approx(1 / (11 * std::pow(std::log(12.0), 1.1))));
}

TEST_CASE("Fredholm grid") {
  const FredholmGrid g = FredholmGrid::make(0.01, 0.25, 400);
  CHECK(g.r(g.K) == doctest::Approx(75.0));
  CHECK(g.r(0) == doctest::Approx(1e-3));
  CHECK(g.weight(0) == doctest::Approx(g.h() / 2));
  CHECK_THROWS_AS(FredholmGrid::make(0.0, 0.25, 400), ConfigurationError);
  CHECK_THROWS_AS(FredholmGrid::make(0.01, 0.25, 4), ConfigurationError);
}

TEST_CASE("weighted field Laplacian and norms") {
  // u = r e^{-r} cos θ: Δ u = e^{-r}(r - 3) cos θ
  WeightedField f;
  f.l = 1;
  f.beta = 0.1;
  f.grid = FredholmGrid::make(0.01, 0.25, 4000);
  f.u.resize(1, f.grid.K + 1);
  for (int k = 0; k <= f.grid.K; ++k) f.u(0, k) = f.grid.r(k) * std::exp(-f.grid.r(k));
  const Eigen::MatrixXd lap = f.laplacian();
  for (int k = 1; k < f.grid.K; k += 97) {
    const double r = f.grid.r(k);
    CHECK(lap(0, k) == doctest::Approx(std::exp(-r) * (r - 3)).epsilon(1e-3));
  }
  // independent quadrature in r for the norms: angular factor ∫cos² = π
  const int M = 200000;
  const double r0 = 1e-3, r1 = 75.0;
  double x2 = 0, y2 = 0;
  for (int k = 0; k < M; ++k) {
    const double r = r0 + (k + 0.5) * (r1 - r0) / M, w = kPi * r * (r1 - r0) / M;
    const double u = r * std::exp(-r), L = std::exp(-r) * (r - 3);
    const double rb = std::pow(1 + r, 1.05), rt = 1 / ((1 + r) * std::pow(std::log(2 + r), 1.05));
    y2 += w * u * u * rb * rb;
    x2 += w * (L * L * rb * rb + u * u * rt * rt);
  }
  const WeightedNorms nrm = weighted_norms(f);
  CHECK(nrm.Y == doctest::Approx(std::sqrt(y2)).epsilon(1e-4));
  CHECK(nrm.X == doctest::Approx(std::sqrt(x2)).epsilon(1e-3));
}

TEST_CASE("orthogonality constants") {
  const RadialBubble& b = pair_bubble();
  const HLocalData h = opposing();
  const double eps = 0.01, tau = 0.25;
  const ModifiedKernelSet Z = modified_kernels(b, h, eps, tau);
  // Σ_i ∂_s h_i ∫ e^{V_i} Z_{ε,s,i} y_s dy = 0, by polar quadrature; the scale comes from the unmodified kernels
  ModifiedKernelSet plain = Z;
  plain.t = {0.0, 0.0};
  const PolarGrid g(1e-6, 3 * tau / eps, 4001, 32);
  auto moment = [&](const ModifiedKernelSet& K, int s, int i) {
    Eigen::MatrixXd f = K.sample(s, g)[i];
    for (int k = 0; k < g.K; ++k)
      for (int m = 0; m < g.M; ++m)
        f(k, m) *= b.ev(i, g.r(k)) * g.r(k) * (s == 0 ? std::cos(g.theta(m)) : std::sin(g.theta(m)));
    return h.grad[i](s) * integrate(g, f);
  };
  for (int s = 0; s < 2; ++s) {
    double total = 0, scale = 0;
    for (int i = 0; i < 2; ++i) {
      total += moment(Z, s, i);
      scale += std::abs(moment(plain, s, i));
    }
    CHECK(std::abs(total) <= 1e-6 * scale);
  }
  HLocalData flat = HLocalData::constant(2);
  const auto t0 = solve_orthogonality(b, flat, eps, tau);
  CHECK(t0[0] == 0.0);
  CHECK(t0[1] == 0.0);
}

TEST_CASE("projection Q") {
  const RadialBubble& b = pair_bubble();
  const HLocalData h = opposing();
  const double eps = 0.01, tau = 0.25;
  const ModifiedKernelSet Z = modified_kernels(b, h, eps, tau);
  const PolarGrid g(1e-3, 3 * tau / eps, 801, 64);
  PolarField u(2, Eigen::MatrixXd(g.K, g.M)), even = u;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < g.K; ++k)
      for (int m = 0; m < g.M; ++m) {
        const double r = g.r(k), th = g.theta(m);
        u[i](k, m) = r / (1 + r * r) * ((i + 1) * std::cos(th) - 0.3 * std::sin(th) + 0.2);
        even[i](k, m) = r / (1 + r * r) * (1 + (i + 1) * std::cos(2 * th));
      }
  const PolarField q = project_Q(u, g, Z);
  const double nu = std::sqrt(pair(g, u, u));
  CHECK(std::abs(pair_kernel(q, g, Z, 0)) <= 1e-12 * nu);
  CHECK(std::abs(pair_kernel(q, g, Z, 1)) <= 1e-12 * nu);
  // frequencies other than 1 are orthogonal to the kernels and pass through unchanged
  const PolarField qe = project_Q(even, g, Z);
  double diff = 0;
  for (int i = 0; i < 2; ++i) diff = std::max(diff, (qe[i] - even[i]).cwiseAbs().maxCoeff());
  CHECK(diff <= 1e-12);
  CHECK(projection_idempotency(b, h, eps, tau) <= 1e-10);
  CHECK(projection_idempotency(b, h, eps, tau, 42) <= 1e-10);
}

TEST_CASE("invertibility check") {
  const RadialBubble& b = pair_bubble();
  const HLocalData h = opposing();
  InvertibilityOptions opt;
  const auto res = invertibility_check(b, h, {0.02}, 0.25, opt);
  REQUIRE(res.size() == 1);
  CHECK(res[0].sigma_min > 0);
  CHECK(res[0].change <= opt.rel_change);
  const auto t = solve_orthogonality(b, h, 0.02, 0.25);
  CHECK(res[0].t[0] == t[0]);
  CHECK_THROWS_AS(invertibility_check(b, h, {0.5}, 0.25, opt), ConfigurationError);
}

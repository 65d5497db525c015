#include "doctest.h"

#include <cmath>
#include <memory>
#include <numbers>

#include "liouville/assembly.hpp"
#include "liouville/errors.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

const TorusGreen& green() {
  static const TorusGreen g;
  return g;
}

CouplingMatrix scalar() { return CouplingMatrix(Eigen::MatrixXd::Constant(1, 1, 1.0)); }

CouplingMatrix swap2() {
  Eigen::Matrix2d a;
  a << 0, 1, 1, 0;
  return CouplingMatrix(a);
}

const BlowupConfig& scalar_config() {
  static const BlowupConfig c = make_config(green(), scalar(), Eigen::VectorXd::Constant(1, 8 * kPi),
                                            PointConfig{{Vec2(0, 0)}}, HField::constant(1), 0.01, 0.0, 256);
  return c;
}

}  // namespace

TEST_CASE("make_config validation") {
  const PointConfig one{{Vec2(0, 0)}};
  const HField h1 = HField::constant(1);
  CHECK_THROWS_AS(make_config(green(), scalar(), Eigen::VectorXd::Constant(1, 7 * kPi), one, h1, 0.01), ConfigurationError);
  CHECK_THROWS_AS(make_config(green(), scalar(), Eigen::VectorXd::Constant(1, 8 * kPi), one, h1, 0.2), ConfigurationError);
  CHECK_THROWS_AS(make_config(green(), scalar(), Eigen::VectorXd::Constant(1, 8 * kPi), one, h1, 0.01, 0.3),
                  ConfigurationError);
  const PointConfig dup{{Vec2(0.2, 0.2), Vec2(0.2, 0.2)}};
  CHECK_THROWS_AS(make_config(green(), scalar(), Eigen::VectorXd::Constant(1, 16 * kPi), dup, h1, 0.01), DistinctnessError);
}

TEST_CASE("scalar configuration data") {
  const BlowupConfig& c = scalar_config();
  CHECK(c.tau == doctest::Approx(0.25));
  CHECK(c.bubble->sigma[0] == doctest::Approx(4).epsilon(1e-8));
  REQUIRE(c.eps.size() == 1);
  CHECK(c.eps[0] == 0.01);
  CHECK(c.H(0, 0) == doctest::Approx(8 * kPi * green().robin()).epsilon(1e-12));
  const BlowupConfig d = with_eps(green(), c, 0.005);
  CHECK(d.eps[0] == 0.005);
  CHECK(d.bubble == c.bubble);
}

TEST_CASE("inner form against the closed-form scaled bubble") {
  const BlowupConfig& c = scalar_config();
  // the matched bubble is ln(8λ²/(1+λ²s²)²) with 8λ² = e^{α}
  const double lam2 = std::exp(c.bubble->alpha[0]) / 8, eps = 0.01, g0 = green().robin();
  for (const Vec2& x : {Vec2(0.003, 0.001), Vec2(-0.05, 0.1), Vec2(0.2, -0.1)}) {
    const double s = x.norm() / eps;
    const double ref = std::log(8 * lam2 / std::pow(1 + lam2 * s * s, 2)) - 2 * std::log(eps) - std::log(8 * kPi) +
                       8 * kPi * (green().regular_part(x, Vec2(0, 0)) - g0);
    CHECK(inner_form(green(), c, 0, 0, x) == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("assembled approximation: matching, mass and labels") {
  const BlowupConfig& c = scalar_config();
  const ApproxSolution s = assemble(green(), c);
  // on |x| = τ the bubble differs from its log tail by 2 ln(1 + 1/(λ²s²)), s = τ/ε
  const double lam2 = std::exp(c.bubble->alpha[0]) / 8;
  auto gap = [&](double eps) { return 2 * std::log1p(eps * eps / (lam2 * 0.25 * 0.25)); };
  CHECK(s.mismatch_sup == doctest::Approx(gap(0.01)).epsilon(1e-3));
  const BlowupConfig c2 = with_eps(green(), c, 0.005);
  const ApproxSolution s2 = assemble(green(), c2);
  CHECK(s2.mismatch_sup == doctest::Approx(gap(0.005)).epsilon(1e-3));
  // ∫ h e^{u} = 1 + (4π/λ²) ε² ln(1/ε) + O(ε²): the log comes from γ - γ(0) ≈ |x|²/4 inside the core
  CHECK(std::abs(s.mass[0] - 1.0) <= 0.05);
  const double d1 = (s.mass[0] - 1) / (0.01 * 0.01), d2 = (s2.mass[0] - 1) / (0.005 * 0.005);
  CHECK(d2 - d1 == doctest::Approx(4 * kPi / lam2 * std::log(2.0)).epsilon(0.02));
  CHECK(std::abs(s2.mass[0] - 1.0) < std::abs(s.mass[0] - 1.0));
  // the outer form is used beyond 2τ
  const Vec2 far(0.5, 0.5);
  CHECK(outer_form(green(), c, s, 0, far) == doctest::Approx(s.u[0](128, 128)).epsilon(1e-12));
  CHECK(s.label(128, 128) == -1);
  CHECK(s.label(0, 0) == 0);
  CHECK(s.label(0, 96) == 1);
}

TEST_CASE("green table agrees with direct evaluation") {
  const PointConfig p{{Vec2(0.1, 0.2), Vec2(0.6, 0.7)}};
  const GreenTable t = green_table(green(), p, 32, 2);
  for (int a : {0, 5, 17, 31})
    for (int b : {3, 16, 30}) {
      const Vec2 x(a / 32.0, b / 32.0);
      const std::size_t idx = static_cast<std::size_t>(a) * 32 + b;
      const int near = torus_distance(x, p.q[0]) <= torus_distance(x, p.q[1]) ? 0 : 1;
      CHECK(t.nearest[idx] == near);
      CHECK(t.dist[idx] == doctest::Approx(torus_distance(x, p.q[near])));
      CHECK(t.gstar[idx] == doctest::Approx(g_star(green(), x, p, near)).epsilon(1e-13));
    }
}

TEST_CASE("residual of the approximate solution") {
  const BlowupConfig c = with_eps(green(), scalar_config(), 0.02);
  const ApproxSolution s = assemble(green(), c);
  const ResidualReport r = residual(c, s);
  CHECK(r.mask == doctest::Approx(0.125));
  CHECK(r.tail_fraction <= 1e-3);
  // the matching error is O(ε²) and enters through χ'' ~ 1/τ², so halving ε cuts the sup by about 4
  const BlowupConfig ch = with_eps(green(), c, 0.01);
  const ResidualReport rh = residual(ch, assemble(green(), ch));
  CHECK(r.sup[0] / rh.sup[0] >= std::pow(2.0, 1.5));
  CHECK(r.sup[0] / rh.sup[0] <= 4.5);
  // a grid that cannot resolve the bubble core is refused
  BlowupConfig coarse = c;
  coarse.grid = 32;
  CHECK_THROWS_AS(residual(coarse, assemble(green(), coarse)), RefineGridError);
}

TEST_CASE("spectral residual of the plane bubble") {
  const RadialBubble b = solve_radial(scalar(), Eigen::VectorXd::Constant(1, std::log(8.0)), 100);
  const double r1 = plane_bubble_residual(b, 40, 256), r2 = plane_bubble_residual(b, 40, 512);
  CHECK(r2 <= 1e-6);
  CHECK(r2 <= r1);
}

TEST_CASE("Pohozaev balance for exact solutions with non-constant weights") {
  auto b = std::make_shared<const RadialBubble>(match_sigma(swap2(), Eigen::Vector2d(3, 6), Eigen::Vector2d(0, 0)));
  const LocalFields f = exact_fields(b, {Vec2(0.01, 0.02), Vec2(0.02, -0.01)});
  for (int s = 0; s < 2; ++s) {
    const PohozaevResult p = pohozaev_balance(f, b->coupling, 20.0, s);
    CHECK(std::abs(p.imbalance) <= 10 * p.quadrature_error + 1e-12);
    CHECK(std::abs(p.volume) > 100 * std::abs(p.imbalance));
  }
  // first-order perturbation of H: the balance fails only at O(ε²)
  HLocalData h = HLocalData::constant(2);
  h.grad = {Vec2(2, 0), Vec2(-1, 0)};
  FrequencyOptions fo;
  fo.tol = 1e-5;
  double prev = 0;
  for (double eps : {1e-2, 5e-3}) {
    const PohozaevResult p = pohozaev_balance(perturbed_fields(b, h, eps, 0.5 / eps, fo), b->coupling, 0.25 / eps, 0);
    const double scaled = std::abs(p.imbalance) / (eps * eps);
    if (prev > 0) CHECK(scaled == doctest::Approx(prev).epsilon(0.25));
    prev = scaled;
  }
  Eigen::Matrix2d sing;
  sing << 1, 1, 1, 1;
  CHECK_THROWS_AS(pohozaev_balance(f, CouplingMatrix(sing), 20.0, 0), StructuralError);
}

TEST_CASE("location identity equals the f gradient") {
  const PointConfig p{{Vec2(0.1, 0.2), Vec2(0.6, 0.55)}};
  std::vector<LogFourier> c(2);
  c[0].modes = {{1, 0, 0.3, 0.0}};
  c[1].modes = {{0, 1, 0.2, 0.1}};
  const HField h(std::move(c));
  const Eigen::Vector2d rho(6 * kPi, 12 * kPi), m(6, 3);
  const LocationReport r = location_check(green(), p, rho, m, h);
  CHECK(r.max_diff <= 1e-8 * std::max(1.0, r.grad_f.cwiseAbs().maxCoeff()));
  // SE1 written out at q_1: Σ_i ρ_i [∇ln h_i + 2π m_i ∇_1 G*]
  const Vec2 dg = grad_1_g_star(green(), p.q[0], p, 0);
  Vec2 se = Vec2::Zero();
  for (int i = 0; i < 2; ++i) se += rho[i] * (h.grad_ln_h(i, p.q[0]) + 2 * kPi * m[i] * dg);
  CHECK((r.se1.head(2) - se).norm() <= 1e-12 * std::max(1.0, se.norm()));
}

TEST_CASE("global cancellation with a constant test function") {
  const BlowupConfig& c = scalar_config();
  const ApproxSolution s = assemble(green(), c);
  const Eigen::VectorXd one = global_cancellation(c, s, [](int, const Vec2&) { return 1.0; });
  CHECK(one[0] == doctest::Approx(8 * kPi * s.mass[0]).epsilon(1e-12));
  // an odd test function about the blowup point integrates to O(ε²) only
  const Eigen::VectorXd odd = global_cancellation(c, s, [](int, const Vec2& x) { return wrap(x)[0]; });
  CHECK(std::abs(odd[0]) <= 1e-3);
}

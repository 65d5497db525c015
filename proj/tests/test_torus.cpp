#include "doctest.h"

#include <cmath>
#include <numbers>

#include "liouville/errors.hpp"
#include "liouville/torus.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

const TorusGreen& green() {
  static const TorusGreen g;
  return g;
}

HField wavy(int n) {
  std::vector<LogFourier> c(n);
  for (int i = 0; i < n; ++i) {
    c[i].c0 = 0.1 * i;
    c[i].modes = {{1, 0, 0.3, 0.1 * i}, {0, 1, 0.2, -0.05}, {1, 1, 0.0, 0.07}};
  }
  return HField(std::move(c));
}

}  // namespace

TEST_CASE("wrap and torus distance") {
  CHECK((wrap(Vec2(0.7, -0.6)) - Vec2(-0.3, 0.4)).norm() < 1e-15);
  CHECK((wrap(Vec2(0.5, -0.5)) - Vec2(-0.5, -0.5)).norm() < 1e-15);
  CHECK(torus_distance(Vec2(0.05, 0.0), Vec2(0.95, 0.0)) == doctest::Approx(0.1));
  CHECK(torus_distance(Vec2(0.1, 0.1), Vec2(0.9, 0.9)) == doctest::Approx(std::sqrt(0.08)));
}

TEST_CASE("Ewald sum agrees with the Fourier series") {
  const TorusGreen& g = green();
  const Vec2 q(0.1, 0.2);
  for (const Vec2& x : {Vec2(0.3, 0.4), Vec2(0.6, 0.7), Vec2(0.1, 0.7), Vec2(0.45, 0.2), Vec2(0.35, 0.5)}) {
    CHECK(std::abs(g.green(x, q) - green_fourier(x - q)) <= 1e-8);
  }
}

TEST_CASE("Robin constant of the square torus") {
  // γ(0) = -(1/2π) ln(2π η(i)²), η the Dedekind eta function
  double eta = std::exp(-kPi / 12);
  for (int n = 1; n < 30; ++n) eta *= 1 - std::exp(-2 * kPi * n);
  CHECK(std::abs(green().robin() + std::log(2 * kPi * eta * eta) / (2 * kPi)) <= 1e-12);
  CHECK(green().regular_part(Vec2(0.3, 0.3), Vec2(0.3, 0.3)) == doctest::Approx(green().robin()).epsilon(1e-12));
}

TEST_CASE("Green function has zero mean") {
  for (const Vec2& q : {Vec2(0, 0), Vec2(0.1, 0.2), Vec2(0.5, 0.37)}) CHECK(std::abs(green_mean(green(), q)) <= 1e-10);
}

TEST_CASE("symmetry, periodicity and evenness") {
  const TorusGreen& g = green();
  const Vec2 x(0.31, 0.77), q(0.12, 0.05);
  CHECK(g.green(x, q) == doctest::Approx(g.green(q, x)).epsilon(1e-13));
  CHECK(g.green(x + Vec2(1, -2), q) == doctest::Approx(g.green(x, q)).epsilon(1e-13));
  CHECK(g.green(q + (q - x), q) == doctest::Approx(g.green(x, q)).epsilon(1e-13));
  // square lattice symmetry: swapping coordinates
  const Vec2 d = x - q;
  CHECK(green_fourier(d) == doctest::Approx(green_fourier(Vec2(d[1], d[0]))).epsilon(1e-12));
}

TEST_CASE("Ewald split parameter does not change the result") {
  const TorusGreen a(0.02), b(0.2);
  const Vec2 x(0.4, 0.15), q(0.0, 0.0);
  CHECK(std::abs(a.green(x, q) - b.green(x, q)) <= 1e-12);
  CHECK(std::abs(a.robin() - b.robin()) <= 1e-12);
}

TEST_CASE("derivatives against finite differences") {
  const TorusGreen& g = green();
  const Vec2 x(0.33, 0.21), q(0.1, 0.9);
  const double h = 1e-5;
  Vec2 fd;
  Mat2 fh;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    fd[k] = (g.green(x + e, q) - g.green(x - e, q)) / (2 * h);
    fh.col(k) = (g.grad_green_1(x + e, q) - g.grad_green_1(x - e, q)) / (2 * h);
  }
  CHECK((g.grad_green_1(x, q) - fd).norm() <= 1e-8);
  CHECK((g.hess_green_11(x, q) - fh).norm() <= 1e-7);
  // -ΔG = -1 away from the pole
  CHECK(g.hess_green_11(x, q).trace() == doctest::Approx(1.0).epsilon(1e-10));

  // regular part near the pole, where G itself is singular
  const Vec2 y = q + Vec2(1e-3, -2e-3);
  Vec2 rd;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    rd[k] = (g.regular_part(y + e, q) - g.regular_part(y - e, q)) / (2 * h);
  }
  CHECK((g.grad_regular_1(y, q) - rd).norm() <= 1e-8);
  CHECK(g.grad_regular_1(q, q).norm() <= 1e-12);
  CHECK(g.hess_regular_11(q, q).trace() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("log-Fourier weights") {
  const HField h = wavy(2);
  const Vec2 x(0.2, 0.6);
  const double s = 1e-5;
  for (int i = 0; i < 2; ++i) {
    Vec2 fd;
    for (int k = 0; k < 2; ++k) {
      Vec2 e = Vec2::Zero();
      e[k] = s;
      fd[k] = (h.ln_h(i, x + e) - h.ln_h(i, x - e)) / (2 * s);
    }
    CHECK((h.grad_ln_h(i, x) - fd).norm() <= 1e-8);
    CHECK(h.h(i, x) == doctest::Approx(std::exp(h.ln_h(i, x))));
    CHECK(h.min_on_grid(i) > 0);
  }
  // 0.1 + 0.3cos(2π·0.2) + 0.05 sin(2π·0.2) + 0.2cos(2π·0.6) + 0.05 sin(2π·0.6) + 0.07 sin(2π·0.8)
  const double ref = 0.1 + 0.3 * std::cos(2 * kPi * 0.2) + 0.1 * std::sin(2 * kPi * 0.2) + 0.2 * std::cos(2 * kPi * 0.6) -
                     0.05 * std::sin(2 * kPi * 0.6) + 0.07 * std::sin(2 * kPi * 0.8);
  CHECK(h.ln_h(1, x) == doctest::Approx(ref).epsilon(1e-14));
  const HField t = h.translated(Vec2(0.1, -0.3));
  CHECK(t.ln_h(0, x) == doctest::Approx(h.ln_h(0, x - Vec2(0.1, -0.3))).epsilon(1e-13));
  CHECK(HField::constant(3, 2.0).h(2, x) == doctest::Approx(2.0));
  CHECK(h.scaled(1, 3.0).h(1, x) == doctest::Approx(3.0 * h.h(1, x)));
}

TEST_CASE("coincident points are rejected") {
  PointConfig c{{Vec2(0.1, 0.2), Vec2(1.1, -0.8)}};
  CHECK_THROWS_AS(c.require_distinct(), DistinctnessError);
  PointConfig d{{Vec2(0.1, 0.2), Vec2(0.6, 0.7)}};
  CHECK_NOTHROW(d.require_distinct());
  CHECK(d.d_min() == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("f functional derivatives against finite differences") {
  const TorusGreen& g = green();
  const HField h = wavy(2);
  const Eigen::Vector2d rho(6 * kPi, 12 * kPi), m(6, 3);
  PointConfig c{{Vec2(0.1, 0.2), Vec2(0.55, 0.6)}};
  const FValue f = f_functional(g, c, rho, m, h);
  const double s = 1e-5;
  Eigen::VectorXd fd(4);
  Eigen::MatrixXd fh(4, 4);
  for (int k = 0; k < 4; ++k) {
    PointConfig p = c, n = c;
    p.q[k / 2][k % 2] += s;
    n.q[k / 2][k % 2] -= s;
    const FValue fp = f_functional(g, p, rho, m, h), fn = f_functional(g, n, rho, m, h);
    fd[k] = (fp.value - fn.value) / (2 * s);
    fh.col(k) = (fp.gradient - fn.gradient) / (2 * s);
  }
  const double gs = std::max(1.0, f.gradient.norm()), hs = std::max(1.0, f.hessian.norm());
  CHECK((f.gradient - fd).norm() <= 1e-6 * gs);
  CHECK((f.hessian - fh).norm() <= 1e-6 * hs);
  CHECK((f.hessian - f.hessian.transpose()).norm() <= 1e-10 * hs);
}

TEST_CASE("critical point search on a symmetric pair") {
  const TorusGreen& g = green();
  const Eigen::Vector2d rho(8 * kPi, 8 * kPi), m(4, 4);
  const HField h = HField::constant(2);
  // (0,0), (1/2,1/2) is critical by symmetry; start nearby
  PointConfig init{{Vec2(0.0, 0.0), Vec2(0.47, 0.52)}};
  CriticalOptions opt;
  opt.seed = 7;
  const CriticalResult r = find_critical(g, init, rho, m, h, opt);
  CHECK(r.grad_norm <= 1e-10);
  const Vec2 d = wrap(r.config.q[1] - r.config.q[0]);
  CHECK(std::abs(std::abs(d[0]) - 0.5) <= 1e-6);
  CHECK(std::abs(std::abs(d[1]) - 0.5) <= 1e-6);
  CHECK(f_functional(g, r.config, rho, m, h).gradient.norm() <= 1e-10);
}

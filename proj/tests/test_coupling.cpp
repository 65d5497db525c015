#include "doctest.h"

#include <cmath>
#include <numbers>

#include "liouville/coupling.hpp"
#include "liouville/errors.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

CouplingMatrix mat2(double a, double b, double c, double d) {
  Eigen::Matrix2d m;
  m << a, b, c, d;
  return CouplingMatrix(m);
}

bool clause(const HypothesisReport& r, const std::string& name) {
  for (const auto& c : r.clauses)
    if (c.name == name) return c.holds;
  FAIL("missing clause " << name);
  return false;
}

}  // namespace

TEST_CASE("swap coupling satisfies both hypotheses") {
  const CouplingMatrix A = mat2(0, 1, 1, 0);
  const HypothesisReport r = check_hypotheses(A);
  CHECK(r.pass);
  CHECK((A.inverse() - A.entries()).norm() < 1e-15);
}

TEST_CASE("identity coupling is reducible with positive inverse diagonal") {
  const HypothesisReport r = check_hypotheses(mat2(1, 0, 0, 1));
  CHECK_FALSE(r.pass);
  CHECK_FALSE(clause(r, "irreducible"));
  CHECK_FALSE(clause(r, "inverse_diagonal_nonpositive"));
  CHECK(clause(r, "symmetric"));
}

TEST_CASE("[[1,2],[2,1]] against a hand 2x2 inverse") {
  const CouplingMatrix A = mat2(1, 2, 2, 1);
  // inverse of [[a,b],[b,d]] is [[d,-b],[-b,a]]/(ad - b²)
  const double det = 1.0 * 1.0 - 2.0 * 2.0;
  Eigen::Matrix2d inv;
  inv << 1.0 / det, -2.0 / det, -2.0 / det, 1.0 / det;
  CHECK((A.inverse() - inv).norm() < 1e-14);
  CHECK(inv(0, 0) == doctest::Approx(-1.0 / 3));
  CHECK(inv(0, 1) == doctest::Approx(2.0 / 3));
  CHECK(check_hypotheses(A).pass);
}

TEST_CASE("non-square and asymmetric input") {
  CHECK_THROWS_AS(CouplingMatrix::from_rows({{0, 1}, {1}}), StructuralError);
  const HypothesisReport r = check_hypotheses(mat2(0, 1, 2, 0));
  CHECK_FALSE(clause(r, "symmetric"));
  CHECK_FALSE(r.pass);
}

TEST_CASE("scalar coupling is exempt but flagged") {
  const HypothesisReport r = check_hypotheses(CouplingMatrix(Eigen::MatrixXd::Constant(1, 1, 1.0)));
  CHECK_FALSE(r.pass);
  CHECK(r.scalar_exempt);
  CHECK(r.usable());
}

TEST_CASE("lambda_in examples") {
  const CouplingMatrix A1(Eigen::MatrixXd::Constant(1, 1, 1.0));
  CHECK(std::abs(lambda_in(A1, {Eigen::VectorXd::Constant(1, 8 * kPi), 1})) < 1e-13);
  const CouplingMatrix S = mat2(0, 1, 1, 0);
  CHECK(std::abs(lambda_in(S, {Eigen::Vector2d(8 * kPi, 8 * kPi), 1})) < 1e-13);
  CHECK(std::abs(lambda_in(S, {Eigen::Vector2d(6 * kPi, 12 * kPi), 1})) < 1e-13);
  // direct formula at an off-surface point: 4(ρ1+ρ2)/(2π) - 2ρ1ρ2/(2π)²
  const Eigen::Vector2d rho(1.0, 2.0);
  CHECK(lambda_in(S, {rho, 1}) == doctest::Approx(4 * 3 / (2 * kPi) - 2 * 2 / (4 * kPi * kPi)).epsilon(1e-14));
}

TEST_CASE("gamma_project closed-form roots") {
  const CouplingMatrix A1(Eigen::MatrixXd::Constant(1, 1, 1.0));
  CHECK(gamma_project(A1, Eigen::VectorXd::Constant(1, 1.0), 1).rho(0) == doctest::Approx(8 * kPi).epsilon(1e-14));
  const CouplingMatrix S = mat2(0, 1, 1, 0);
  const ParamVector p = gamma_project(S, Eigen::Vector2d(1, 1), 1);
  CHECK(p.rho(0) == doctest::Approx(8 * kPi).epsilon(1e-14));
  CHECK(p.rho(1) == doctest::Approx(8 * kPi).epsilon(1e-14));
  // 4·3s/(2π) = 2·2s²/(4π²) gives s = 6π
  const ParamVector q = gamma_project(S, Eigen::Vector2d(1, 2), 1);
  CHECK(q.rho(0) == doctest::Approx(6 * kPi).epsilon(1e-14));
  CHECK(q.rho(1) == doctest::Approx(12 * kPi).epsilon(1e-14));
}

TEST_CASE("gamma_project lands on the surface for random rays") {
  const CouplingMatrix A = mat2(1, 2, 2, 1);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d ray(0.3 + 0.1 * k, 1.7 - 0.05 * k);
    for (int N : {1, 2, 3}) {
      const ParamVector p = gamma_project(A, ray, N);
      const double scale = 4 * p.rho.sum() / (2 * kPi * N);
      CHECK(std::abs(lambda_in(A, p)) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("gamma_project rejects infeasible rays") {
  CHECK_THROWS_AS(gamma_project(mat2(0, 1, 1, 0), Eigen::Vector2d(-1, 1), 1), InfeasibleRayError);
  CHECK_THROWS_AS(gamma_project(mat2(0, 1, 1, 0), Eigen::Vector3d(1, 1, 1), 1), StructuralError);
}

TEST_CASE("m_star examples") {
  const CouplingMatrix A1(Eigen::MatrixXd::Constant(1, 1, 1.0));
  MassData md = m_star(A1, {Eigen::VectorXd::Constant(1, 8 * kPi), 1});
  CHECK(md.sigma(0) == doctest::Approx(4));
  CHECK(md.m_star == doctest::Approx(4));

  const CouplingMatrix S = mat2(0, 1, 1, 0);
  md = m_star(S, {Eigen::Vector2d(6 * kPi, 12 * kPi), 1});
  CHECK(md.sigma(0) == doctest::Approx(3));
  CHECK(md.sigma(1) == doctest::Approx(6));
  CHECK(md.m(0) == doctest::Approx(6));
  CHECK(md.m(1) == doctest::Approx(3));
  CHECK(md.m_star == doctest::Approx(3));
  CHECK_FALSE(md.non_integrable);

  md = m_star(S, {Eigen::Vector2d(8 * kPi, 8 * kPi), 2});
  CHECK(md.m_star == doctest::Approx(2));
  CHECK(md.non_integrable);
}

TEST_CASE("permutation invariance") {
  Eigen::Matrix3d a;
  a << 0, 1, 2, 1, 0, 3, 2, 3, 0;
  Eigen::PermutationMatrix<3> P;
  P.indices() << 2, 0, 1;
  const Eigen::Matrix3d b = P.transpose() * a * P;
  const CouplingMatrix A(a), B(b);
  const Eigen::Vector3d rho(1, 2, 3);
  const Eigen::Vector3d prho = P.transpose() * rho;
  CHECK(lambda_in(A, {rho, 1}) == doctest::Approx(lambda_in(B, {prho, 1})).epsilon(1e-14));
  const HypothesisReport ra = check_hypotheses(A), rb = check_hypotheses(B);
  REQUIRE(ra.clauses.size() == rb.clauses.size());
  for (std::size_t k = 0; k < ra.clauses.size(); ++k) CHECK(ra.clauses[k].holds == rb.clauses[k].holds);
}

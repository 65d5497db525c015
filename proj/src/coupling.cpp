#include "liouville/coupling.hpp"

#include <cmath>
#include <numbers>
#include <queue>

#include "liouville/errors.hpp"

namespace liouville {

namespace {
constexpr double kDetTol = 1e-12;
constexpr double kZeroTol = 1e-14;
}  // namespace

CouplingMatrix::CouplingMatrix(const Eigen::MatrixXd& entries) : a_(entries) {
  if (a_.rows() != a_.cols() || a_.rows() == 0)
    throw StructuralError("coupling matrix must be square and non-empty");
  double s = scale();
  double det = a_.determinant();
  if (std::abs(det) > kDetTol * std::pow(s, static_cast<double>(n()))) inv_ = a_.inverse();
}

CouplingMatrix CouplingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const auto n = rows.size();
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw StructuralError("coupling matrix row " + std::to_string(i) + " has wrong length");
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rows[i][j];
  }
  return CouplingMatrix(a);
}

double CouplingMatrix::scale() const {
  double s = a_.cwiseAbs().maxCoeff();
  return s > 0 ? s : 1.0;
}

HypothesisReport check_hypotheses(const CouplingMatrix& A) {
  const auto& a = A.entries();
  const int n = A.n();
  const double tol = kZeroTol * A.scale();
  HypothesisReport rep;
  // clause references below stay valid only without reallocation
  rep.clauses.reserve(8);

  auto clause = [&](const std::string& name) -> HypothesisClause& {
    rep.clauses.push_back({name, true, -1, -1});
    return rep.clauses.back();
  };
  auto fail_at = [](HypothesisClause& c, int i, int j) {
    if (c.holds) {
      c.holds = false;
      c.i = i;
      c.j = j;
    }
  };

  auto& sym = clause("symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) fail_at(sym, i, j);

  auto& nonneg = clause("nonnegative");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) < 0) fail_at(nonneg, i, j);

  auto& inv = clause("invertible");
  inv.holds = A.invertible();

  auto& irr = clause("irreducible");
  {
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    while (!q.empty()) {
      int i = q.front();
      q.pop();
      for (int j = 0; j < n; ++j)
        if (!seen[j] && (std::abs(a(i, j)) > tol || std::abs(a(j, i)) > tol)) {
          seen[j] = true;
          q.push(j);
        }
    }
    for (int j = 0; j < n; ++j)
      if (!seen[j]) fail_at(irr, 0, j);
  }

  auto& diag = clause("inverse_diagonal_nonpositive");
  auto& off = clause("inverse_offdiagonal_nonnegative");
  auto& rows = clause("inverse_row_sums_nonnegative");
  if (A.invertible()) {
    const auto& b = A.inverse();
    const double itol = kZeroTol * b.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (b(i, i) > itol) fail_at(diag, i, i);
      for (int j = 0; j < n; ++j)
        if (j != i && b(i, j) < -itol) fail_at(off, i, j);
      if (b.row(i).sum() < -itol) fail_at(rows, i, -1);
    }
  } else {
    diag.holds = off.holds = rows.holds = false;
  }

  rep.pass = true;
  for (const auto& c : rep.clauses) rep.pass = rep.pass && c.holds;
  rep.scalar_exempt = (n == 1 && a(0, 0) > 0);
  return rep;
}

double lambda_in(const CouplingMatrix& A, const ParamVector& p) {
  const double two_pi_n = 2.0 * std::numbers::pi * p.N;
  const double lin = 4.0 * p.rho.sum() / two_pi_n;
  const double quad = p.rho.dot(A.entries() * p.rho) / (two_pi_n * two_pi_n);
  return lin - quad;
}

ParamVector gamma_project(const CouplingMatrix& A, const Eigen::VectorXd& rho0, int N) {
  if (rho0.size() != A.n()) throw StructuralError("rho0 has wrong dimension");
  if ((rho0.array() <= 0).any()) throw InfeasibleRayError("rho0 must be positive");
  // Lambda(s rho0) = s [4 S/(2 pi N)] - s^2 [Q/(2 pi N)^2]
  const double two_pi_n = 2.0 * std::numbers::pi * N;
  const double S = rho0.sum();
  const double Q = rho0.dot(A.entries() * rho0);
  if (Q <= 0) throw InfeasibleRayError("quadratic form along the ray is not positive");
  const double s = 4.0 * two_pi_n * S / Q;
  return {s * rho0, N};
}

MassData masses_from_sigma(const CouplingMatrix& A, const Eigen::VectorXd& sigma) {
  MassData md;
  md.sigma = sigma;
  md.m = A.entries() * sigma;
  md.m_star = md.m.minCoeff();
  md.non_integrable = md.m_star <= 2.0;
  return md;
}

MassData m_star(const CouplingMatrix& A, const ParamVector& p) {
  return masses_from_sigma(A, p.rho / (2.0 * std::numbers::pi * p.N));
}

}  // namespace liouville

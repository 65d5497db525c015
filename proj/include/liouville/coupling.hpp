#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace liouville {

class CouplingMatrix {
 public:
  CouplingMatrix() = default;
  explicit CouplingMatrix(const Eigen::MatrixXd& entries);
  static CouplingMatrix from_rows(const std::vector<std::vector<double>>& rows);

  int n() const { return static_cast<int>(a_.rows()); }
  const Eigen::MatrixXd& entries() const { return a_; }
  // Empty if the matrix is singular.
  const Eigen::MatrixXd& inverse() const { return inv_; }
  bool invertible() const { return inv_.size() > 0; }
  double operator()(int i, int j) const { return a_(i, j); }
  // Max-abs entry; the reference scale for relative thresholds.
  double scale() const;

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd inv_;
};

struct ParamVector {
  Eigen::VectorXd rho;
  int N = 1;
};

struct MassData {
  Eigen::VectorXd sigma;
  Eigen::VectorXd m;
  double m_star = 0.0;
  // m* <= 2: bubble masses diverge.
  bool non_integrable = false;
};

struct HypothesisClause {
  std::string name;
  bool holds = true;
  int i = -1, j = -1;  // witness, -1 when not applicable
};

struct HypothesisReport {
  std::vector<HypothesisClause> clauses;
  bool pass = false;
  // n = 1 violates a^{11} <= 0 but is kept as the scalar reference problem.
  bool scalar_exempt = false;
  // Pass, or the scalar exemption applies.
  bool usable() const { return pass || scalar_exempt; }
};

HypothesisReport check_hypotheses(const CouplingMatrix& A);

double lambda_in(const CouplingMatrix& A, const ParamVector& p);

// s* rho0 with Lambda(s* rho0) = 0, s* > 0.
ParamVector gamma_project(const CouplingMatrix& A, const Eigen::VectorXd& rho0, int N);

MassData m_star(const CouplingMatrix& A, const ParamVector& p);
MassData masses_from_sigma(const CouplingMatrix& A, const Eigen::VectorXd& sigma);

}  // namespace liouville

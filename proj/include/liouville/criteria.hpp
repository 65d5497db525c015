#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "liouville/linearized.hpp"
#include "liouville/torus.hpp"

namespace liouville {

enum class Regime { A, B, C, Unclassified, Degenerate };
const char* regime_name(Regime r);

// H_it = 2π m_i G*(q_t; q_t) + ln h_i(q_t), n x N
Eigen::MatrixXd h_matrix(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& m);

// L_it = Δln h_i(q_t) + 8πN + |∇ln h_i(q_t) + 8π ∇_1 G*(q_t; q_t)|²
Eigen::MatrixXd l_coefficients(const TorusGreen& g, const PointConfig& c, const HField& h);

// Voronoi cell of q_t in polar form about q_t: boundary radius R(θ) and the
// angles where the active bisector changes.
struct CellPolygon {
  Vec2 center;
  std::vector<Vec2> sites;  // displacements of neighbouring images from the center
  std::vector<double> corners;  // sorted in [0, 2π)
  double boundary(double theta) const;
  double inradius() const;
};

CellPolygon voronoi_cell(const PointConfig& c, int t);

struct DOptions {
  int angular_nodes = 48;  // Gauss-Legendre nodes per polygon edge
  int radial_nodes = 48;   // Gauss-Legendre nodes in ln r
  int annulus_theta = 128; // trapezoid nodes on the inner annulus
  double spread_tol = 1e-3;
};

struct DTrace {
  std::vector<double> tau;
  std::vector<double> F;
  std::vector<double> corrected;  // F with the τ^{4-m} (or ln τ) local term removed
  std::vector<double> extrapolated;  // one per consecutive pair
  double exponent = 0.0;
  double spread = 0.0;
  bool log_corrected = false;  // m = 4: the removed local term is logarithmic
};

struct DResult {
  Eigen::MatrixXd D;  // n x N
  std::vector<std::vector<DTrace>> traces;  // [i][t]
};

// tau_fractions multiply d_min (or 1/2 when N = 1). Throws ResolutionError
// when consecutive pair extrapolations differ by more than spread_tol·|D|.
DResult d_coefficients(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& I,
                       const Eigen::VectorXd& m, const std::vector<double>& tau_fractions, const DOptions& opt = {});

Regime classify_regime(double m_star, double S_D, double S_L, double scale_D = 1.0, double scale_L = 1.0);

struct EpsilonRatios {
  std::vector<double> eps;  // ε_1 .. ε_N
  double inconsistency = 0.0;
  bool warning = false;
};

EpsilonRatios epsilon_ratios(const Eigen::MatrixXd& H, const Eigen::VectorXd& m, double eps1);

struct CriteriaReport {
  Eigen::MatrixXd H, D, L;
  Eigen::VectorXd m;
  double m_star = 0.0;
  double S_D = 0.0, S_L = 0.0;
  // restricted to indices with m_i = m*
  double S_D_hat = 0.0, S_L_hat = 0.0;
  Regime regime = Regime::Unclassified;
  std::vector<std::vector<DTrace>> traces;
  std::string cells = "torus Voronoi cells";
};

CriteriaReport criteria_report(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& I,
                               const Eigen::VectorXd& m, const std::vector<double>& tau_fractions,
                               const DOptions& opt = {});

enum class LambdaForm { Restricted, Full };

// Leading-order Λ at base scale ε_1; throws ConfigurationError for unclassified regimes.
double lambda_prediction(const CriteriaReport& r, double eps1, LambdaForm form = LambdaForm::Restricted);

// H local data for the weight H_i(y) = h_i(q_t + y) e^{2π m_i (G*(q_t+y; q_t) - G*(q_t; q_t))}
// at a blowup point, regular parts only.
HLocalData local_weight(const TorusGreen& g, const PointConfig& c, const HField& h, const Eigen::VectorXd& m, int t);

}  // namespace liouville

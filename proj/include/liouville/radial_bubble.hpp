#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "liouville/coupling.hpp"

namespace liouville {

struct RadialOptions {
  double r0 = 1e-6;
  // Node spacing in t = ln r.
  double dt = 0.01;
  // Integrator tolerance; the residual target is passed separately.
  double ode_tol = 1e-13;
  // Recompute with a 100x looser integrator to estimate the sigma error.
  bool estimate_error = true;
};

// Radial entire solution of -Δv_i = Σ_j a_ij e^{v_j} on R^2, stored on a
// uniform grid in t = ln r as w_i(t) = v_i(e^t) together with the partial
// masses mu_i(t) = ∫_0^r e^{v_i} s ds.
class RadialBubble {
 public:
  CouplingMatrix coupling;
  Eigen::VectorXd alpha;
  double R = 0.0;
  double tol = 0.0;
  Eigen::VectorXd sigma, m, I;

  // diagnostics
  double ode_residual = 0.0;
  double pohozaev_residual = 0.0;  // |4Σσ - σ·Aσ| / (4Σσ)
  Eigen::VectorXd m_slope;         // m from a log-slope fit of the last decade
  Eigen::VectorXd sigma_err;       // empty unless estimated
  int fixed_point_iters = 0;

  int n() const { return coupling.n(); }
  int nodes() const { return static_cast<int>(t_.size()); }
  double t_node(int k) const { return t_[k]; }
  double r_node(int k) const;
  double w_node(int i, int k) const { return w_(i, k); }
  double wt_node(int i, int k) const { return wt_(i, k); }
  double mu_node(int i, int k) const { return mu_(i, k); }
  double t0() const { return t_.front(); }
  double t1() const { return t_.back(); }

  // v_i(r), dv_i/dr, d²v_i/dr² for any r > 0 (series below r0, tail beyond R).
  double v(int i, double r) const;
  double dv(int i, double r) const;
  double d2v(int i, double r) const;
  // r v_i'(r) (= dw/dt); finite at r = 0.
  double rdv(int i, double r) const;
  // all components at once: v, r v'
  void eval(double r, double* v, double* rdv) const;
  double ev(int i, double r) const;
  // ∫_0^r e^{v_i} s ds
  double partial_mass(int i, double r) const;

  // e^{I_i} r^{-m_i} (1 + first-order tail) asymptotics beyond R
  double tail_v(int i, double r, double* rdv = nullptr) const;
  double tail_mass(int i, double R) const;

  // Rescaled profile v(λr) + 2 ln λ has alpha + 2 ln λ and I + (2 - m) ln λ.
  double v_scaled(int i, double r, double log_lambda) const { return v(i, r * std::exp(log_lambda)) + 2.0 * log_lambda; }

  void set_grid(std::vector<double> t, Eigen::MatrixXd w, Eigen::MatrixXd wt, Eigen::MatrixXd mu, double r0);
  void series(int i, double r, double* v, double* rdv) const;

 private:
  std::vector<double> t_;
  Eigen::MatrixXd w_, wt_, mu_;
  double r0_ = 1e-6;
  void hermite(int i, double t, double* w, double* wt, double* wtt) const;
};

RadialBubble solve_radial(const CouplingMatrix& A, const Eigen::VectorXd& alpha, double R, double tol = 1e-8,
                          const RadialOptions& opt = {});

MassData masses(const RadialBubble& b);
Eigen::VectorXd asymptotic_constants(const RadialBubble& b);

struct MatchOptions {
  int max_iter = 50;
  double tol = 1e-8;
  double R = 1e12;
  double fd_step = 1e-6;
};

// Pins alpha_1 = alpha_init(0) and solves for the remaining components.
RadialBubble match_sigma(const CouplingMatrix& A, const Eigen::VectorXd& sigma_target, const Eigen::VectorXd& alpha_init,
                         const MatchOptions& opt = {});

struct ExpansionReport {
  // small r, per component
  Eigen::VectorXd r2_fit, r2_pred;
  Eigen::VectorXd r4_fit, r4_pred64, r4_pred196;
  // "1/64" or "1/196" or "neither" per component
  std::vector<std::string> r4_match;
  // large r: coefficient matrix (n x n), NaN where a_ij = 0
  Eigen::MatrixXd large_fit, large_pred;
  Eigen::VectorXd decay_exponent_fit, decay_exponent_pred;
  double small_cond = 0.0, large_cond = 0.0;
  std::vector<std::string> warnings;
};

ExpansionReport verify_expansions(const RadialBubble& b);

}  // namespace liouville

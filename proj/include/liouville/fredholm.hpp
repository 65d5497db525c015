#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "liouville/linearized.hpp"
#include "liouville/polar_grid.hpp"
#include "liouville/radial_bubble.hpp"

namespace liouville {

// C² smoothstep cutoffs in the scaled variable x = ε|y|.
double chi(double x, double tau);       // 1 on [0, τ], 0 beyond 2τ
double chi_star(double x, double tau);  // 1 on [7τ/3, 8τ/3], 0 outside [2τ, 3τ]

// Uniform grid in t = ln r on [ln r_min, ln(3τ/ε)]; node K sits on the outer circle.
struct FredholmGrid {
  double t0 = 0.0, t1 = 0.0;
  int K = 0;
  static FredholmGrid make(double eps, double tau, int K, double r_min = 1e-3);
  double h() const { return (t1 - t0) / K; }
  double t(int k) const { return t0 + k * h(); }
  double r(int k) const;
  double weight(int k) const;  // trapezoid weight in t
};

// Angular frequency ℓ field u_i(r)·{cos ℓθ or 1}, samples n x (K+1).
struct WeightedField {
  int l = 1;
  double beta = 0.1;
  FredholmGrid grid;
  Eigen::MatrixXd u;
  // e^{-2t}(u_tt - ℓ²u) per component at every node
  Eigen::MatrixXd laplacian() const;
};

struct WeightedNorms {
  double X = 0.0, Y = 0.0;
};

double rho_beta(double r, double beta);
double rho_tilde_beta(double r, double beta);

WeightedNorms weighted_norms(const WeightedField& f);

// Z_{ε,s,i}(y; t) = V_i'(r) [χ(εr) + t χ_*(εr) sgn(∂_s h_i(0))] times cos θ (s = 0) or sin θ (s = 1).
struct ModifiedKernelSet {
  const RadialBubble* bubble = nullptr;
  double eps = 0.0, tau = 0.0;
  std::array<double, 2> t{0.0, 0.0};
  std::array<Eigen::VectorXd, 2> sign;
  double radial(int s, int i, double r) const;
  PolarField sample(int s, const PolarGrid& g) const;
};

// The affine equation in t_s, solved for s = 1, 2. Zero gradient in a direction gives t_s = 0.
std::array<double, 2> solve_orthogonality(const RadialBubble& b, const HLocalData& h, double eps, double tau);

ModifiedKernelSet modified_kernels(const RadialBubble& b, const HLocalData& h, double eps, double tau);

// u - Σ_s c_s e^{V} Z_{ε,s} with c chosen so that <Qu, Z_{ε,s}> = 0 for both s.
PolarField project_Q(const PolarField& u, const PolarGrid& g, const ModifiedKernelSet& Z);

// Σ_i ∫ u_i Z_{ε,s,i} over the grid
double pair_kernel(const PolarField& u, const PolarGrid& g, const ModifiedKernelSet& Z, int s);

// ‖Q(Qu) - Qu‖ / ‖Qu‖ for a random smooth u on B_{3τ/ε}
double projection_idempotency(const RadialBubble& b, const HLocalData& h, double eps, double tau,
                              std::uint64_t seed = 0);

struct InvertibilityOptions {
  double beta = 0.1;
  int K0 = 400;
  int max_doublings = 3;
  double r_min = 1e-3;
  double rel_change = 0.1;
  bool unconstrained = true;  // also report the unprojected operator
};

struct InvertibilityResult {
  double eps = 0.0;
  double sigma_min = 0.0;                // Q L on E, frequency-1 block
  double sigma_min_unconstrained = 0.0;  // L alone
  std::array<double, 2> t{0.0, 0.0};
  int K = 0;
  double change = 0.0;  // relative change from the previous grid
};

std::vector<InvertibilityResult> invertibility_check(const RadialBubble& b, const HLocalData& h,
                                                     const std::vector<double>& eps_list, double tau,
                                                     const InvertibilityOptions& opt = {});

}  // namespace liouville

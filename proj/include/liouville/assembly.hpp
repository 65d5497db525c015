#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "liouville/coupling.hpp"
#include "liouville/criteria.hpp"
#include "liouville/linearized.hpp"
#include "liouville/radial_bubble.hpp"
#include "liouville/torus.hpp"

namespace liouville {

struct BlowupConfig {
  CouplingMatrix A;
  Eigen::VectorXd rho;
  PointConfig points;
  HField h;
  double eps1 = 0.01;
  double tau = 0.0;
  int grid = 512;
  std::shared_ptr<const RadialBubble> bubble;  // matched to σ = ρ/(2πN)
  std::vector<double> eps;                     // ε_t from epsilon_ratios
  Eigen::MatrixXd H;
  int N() const { return points.N(); }
  int n() const { return A.n(); }
  const Eigen::VectorXd& m() const { return bubble->m; }
  // min(d_min, 1): the self-image distance bounds it when N = 1
  double separation() const;
};

// Matches the bubble, fills ε_t and H, and checks Λ(ρ) = 0, distinctness and ε_1 < separation/10.
// tau <= 0 selects separation/4.
BlowupConfig make_config(const TorusGreen& g, const CouplingMatrix& A, const Eigen::VectorXd& rho,
                         const PointConfig& points, const HField& h, double eps1, double tau = 0.0, int grid = 512,
                         const Eigen::VectorXd& alpha_init = {});

// Same bubble and points, new base scale.
BlowupConfig with_eps(const TorusGreen& g, const BlowupConfig& c, double eps1);

// Per grid node: the nearest blowup point, its torus distance, and the regular G*(x; q_nearest).
// Independent of ε, so one table serves an ε sweep.
struct GreenTable {
  int M = 0;
  std::vector<int> nearest;
  std::vector<double> dist;
  std::vector<double> gstar;
};

GreenTable green_table(const TorusGreen& g, const PointConfig& points, int M, int threads = 1);

struct ApproxSolution {
  int M = 0;
  std::vector<Eigen::MatrixXd> u;  // n fields, u[i](row = x index, col = y index)
  Eigen::MatrixXi label;           // -1 outer, t inside B_τ(q_t), N + t in the blending annulus
  Eigen::VectorXd ubar;            // average from the bubble data
  Eigen::VectorXd mean;            // grid average of u_i
  Eigen::MatrixXd mismatch;        // n x N, sup over ∂B_τ(q_t) of |inner - outer|
  double mismatch_sup = 0.0;
  Eigen::VectorXd mass;            // ∫ h_i e^{u_i}
  // polar nodes on the disks, for integrals that must resolve the bubble cores
  std::vector<Vec2> disk_x;
  Eigen::VectorXd disk_w;
  Eigen::MatrixXd disk_density;  // n x nodes, h_i e^{inner_i}
};

// Inner form on B_τ(q_t), outer Green form beyond 2τ, C² blend between.
ApproxSolution assemble(const TorusGreen& g, const BlowupConfig& c, const GreenTable* table = nullptr);

double inner_form(const TorusGreen& g, const BlowupConfig& c, int i, int t, const Vec2& x);
double outer_form(const TorusGreen& g, const BlowupConfig& c, const ApproxSolution& s, int i, const Vec2& x);

struct ResidualReport {
  std::vector<Eigen::MatrixXd> field;
  Eigen::VectorXd l2, sup;  // over the grid outside B_{mask}(q_t)
  double tail_fraction = 0.0;
  double mask = 0.0;
};

// -Δu_i - Σ_j a_ij ρ_j (h_j e^{u_j}/∫h_j e^{u_j} - 1) with a spectral Laplacian.
// mask <= 0 selects τ/2. Throws RefineGridError when more than 1e-3 of the spectral energy of
// h_j e^{u_j} sits in the upper half of the wavenumbers.
ResidualReport residual(const BlowupConfig& c, const ApproxSolution& s, double mask = 0.0);

// -ΔV - Σ a e^V for a bubble sampled on the periodic box [-L/2, L/2)^2; sup over |x| <= L/4.
double plane_bubble_residual(const RadialBubble& b, double L, int M);

struct LocalFields {
  int n = 0;
  std::function<double(int, const Vec2&)> v;
  std::function<Vec2(int, const Vec2&)> grad_v;
  std::function<double(int, const Vec2&)> H;
  std::function<Vec2(int, const Vec2&)> grad_H;
};

struct PohozaevOptions {
  int nt = 1601;
  int ntheta = 128;
  double r_min = 1e-8;
};

struct PohozaevResult {
  double volume = 0.0;
  double boundary = 0.0;
  double imbalance = 0.0;
  double quadrature_error = 0.0;  // change of the terms on the half-resolution grid
};

// Σ_i ∫_{B_R} ∂_s H_i e^{v_i} against
// ∫_{∂B_R} ν_s Σ_i H_i e^{v_i} + Σ_ij a^{ij}(∂_s v_i ∂_ν v_j - ½ ∇v_i·∇v_j ν_s).
PohozaevResult pohozaev_balance(const LocalFields& f, const CouplingMatrix& A, double R, int s,
                                const PohozaevOptions& opt = {});

// v_i = V_i + β_i·y with H_i = e^{-β_i·y}: an exact solution with non-constant H.
LocalFields exact_fields(std::shared_ptr<const RadialBubble> b, const std::vector<Vec2>& beta);

// H_i(y) = 1 + ε ∇ln h_i(0)·y and v = V + c_{1,1}, the frequency-1 correction for both directions.
LocalFields perturbed_fields(std::shared_ptr<const RadialBubble> b, const HLocalData& h, double eps, double r_out,
                             const FrequencyOptions& opt = {});

struct LocationReport {
  Eigen::VectorXd se1;     // stacked over t
  Eigen::VectorXd grad_f;  // ∇f from the torus module
  double max_diff = 0.0;
};

LocationReport location_check(const TorusGreen& g, const PointConfig& points, const Eigen::VectorXd& rho,
                              const Eigen::VectorXd& m, const HField& h);

// Σ_j a_ij ρ_j ∫ h_j e^{u_j} ξ_j for each i
Eigen::VectorXd global_cancellation(const BlowupConfig& c, const ApproxSolution& s,
                                    const std::function<double(int, const Vec2&)>& xi);

}  // namespace liouville

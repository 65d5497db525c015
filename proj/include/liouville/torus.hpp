#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace liouville {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Representative of x in [-1/2, 1/2)^2.
Vec2 wrap(const Vec2& x);
double torus_distance(const Vec2& x, const Vec2& y);

// Green's function of the unit square flat torus, -ΔG = δ_q - 1, ∫G = 0,
// by Ewald summation with heat-kernel split time s.
class TorusGreen {
 public:
  explicit TorusGreen(double split = 0.25 / 3.14159265358979323846, double cutoff = 45.0);

  double green(const Vec2& x, const Vec2& q) const;
  Vec2 grad_green_1(const Vec2& x, const Vec2& q) const;
  Mat2 hess_green_11(const Vec2& x, const Vec2& q) const;

  // γ(x,q) = G(x,q) + (1/2π) ln|x - q|, with |.| the local flat distance
  double regular_part(const Vec2& x, const Vec2& q) const;
  Vec2 grad_regular_1(const Vec2& x, const Vec2& q) const;
  Mat2 hess_regular_11(const Vec2& x, const Vec2& q) const;

  double robin() const { return gamma0_; }
  double split() const { return s_; }

 private:
  double s_, cutoff_;
  int nreal_, nrecip_;
  double gamma0_;
  // real-space images; skip_origin drops n = 0
  void real_sum(const Vec2& d, bool skip_origin, double* val, Vec2* grad, Mat2* hess) const;
  void recip_sum(const Vec2& d, double* val, Vec2* grad, Mat2* hess) const;
};

// Fourier series of G with one lattice direction summed in closed form.
double green_fourier(const Vec2& d, int modes = 401);

// ∫_M G(x, q) dx by polar Gauss quadrature over the unit cell centred at q,
// with the logarithm integrated in closed form.
double green_mean(const TorusGreen& g, const Vec2& q, int nodes = 40);

struct FourierMode {
  int k1 = 0, k2 = 0;
  double c = 0.0, s = 0.0;
};

// ln h = c0 + Σ c cos(2π k·x) + s sin(2π k·x)
struct LogFourier {
  double c0 = 0.0;
  std::vector<FourierMode> modes;
};

class HField {
 public:
  HField() = default;
  explicit HField(std::vector<LogFourier> comps) : comps_(std::move(comps)) {}
  static HField constant(int n, double value = 1.0);

  int n() const { return static_cast<int>(comps_.size()); }
  const LogFourier& component(int i) const { return comps_[i]; }
  double ln_h(int i, const Vec2& x) const;
  double h(int i, const Vec2& x) const;
  Vec2 grad_ln_h(int i, const Vec2& x) const;
  Mat2 hess_ln_h(int i, const Vec2& x) const;
  double lap_ln_h(int i, const Vec2& x) const { return hess_ln_h(i, x).trace(); }
  // min of h_i over a 64x64 grid; must be positive
  double min_on_grid(int i, int grid = 64) const;
  // x ↦ h(x - shift)
  HField translated(const Vec2& shift) const;
  HField scaled(int i, double c) const;

 private:
  std::vector<LogFourier> comps_;
};

struct PointConfig {
  std::vector<Vec2> q;
  int N() const { return static_cast<int>(q.size()); }
  double d_min() const;
  // throws DistinctnessError if two points coincide
  void require_distinct(double tol = 1e-12) const;
};

// G*(x; q_t) = γ(x, q_t) + Σ_{s≠t} G(x, q_s)
double g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t);
Vec2 grad_1_g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t);
Mat2 hess_1_g_star(const TorusGreen& g, const Vec2& x, const PointConfig& c, int t);

struct FValue {
  double value = 0.0;
  Eigen::VectorXd gradient;  // 2N, ordered (q_1x, q_1y, q_2x, ...)
  Eigen::MatrixXd hessian;   // 2N x 2N
};

FValue f_functional(const TorusGreen& g, const PointConfig& c, const Eigen::VectorXd& rho, const Eigen::VectorXd& m,
                    const HField& h);

// Σ_i ρ_i [∇ln h_i(q_t) + 2π m_i ∇_1 G*(q_t; q_t)], stacked over t
Eigen::VectorXd se1_residual(const TorusGreen& g, const PointConfig& c, const Eigen::VectorXd& rho,
                             const Eigen::VectorXd& m, const HField& h);

struct CriticalOptions {
  double grad_tol = 1e-10;
  int max_iter = 100;
  int starts = 20;
  double jitter = 0.05;
  std::uint64_t seed = 0;
};

struct CriticalResult {
  PointConfig config;
  Eigen::VectorXd eigenvalues;
  bool nondegenerate = false;
  double grad_norm = 0.0;
  int iterations = 0;
  int start_used = 0;
};

CriticalResult find_critical(const TorusGreen& g, const PointConfig& init, const Eigen::VectorXd& rho,
                             const Eigen::VectorXd& m, const HField& h, const CriticalOptions& opt = {});

}  // namespace liouville

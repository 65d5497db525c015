#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "liouville/polar_grid.hpp"
#include "liouville/radial_bubble.hpp"
#include "liouville/torus.hpp"

namespace liouville {

// Local data of the weights at a blowup point: values h_i(0), ∇ln h_i(0), ∇²ln h_i(0).
struct HLocalData {
  Eigen::VectorXd value;
  std::vector<Vec2> grad;
  std::vector<Mat2> hess;

  int n() const { return static_cast<int>(value.size()); }
  double lap(int i) const { return hess[i].trace(); }
  static HLocalData constant(int n);
};

// Radial profile(s) of a kernel of the linearized limit operator. Frequency 0:
// Z_0 = r V' + 2; frequencies 1 and 2 (x- and y-translation) share V' with
// angular factors cos θ and sin θ.
struct KernelField {
  int frequency = 0;
  std::shared_ptr<const RadialBubble> bubble;
  double profile(int i, double r) const;
  // max deviation from an independent IVP integration of the linearized ODE
  double ode_residual = 0.0;
  // |Z_0(R) - (2 - m_i)|, frequency 0 only
  Eigen::VectorXd far_field_error;
};

std::array<KernelField, 3> kernel_fields(const RadialBubble& b);

// Per-component radial function r ↦ s_i(r).
using RadialSource = std::function<double(int i, double r)>;

struct FrequencyOptions {
  double tol = 1e-6;
  double r_min = 1e-4;
  double h0 = 0.01;
  int max_refine = 6;
  // ℓ = 1 near-singular handling: Auto projects only when the singular-value
  // check trips, Never throws RequiresProjectionError, Always projects.
  enum class Projection { Auto, Never, Always };
  Projection projection = Projection::Auto;
  double singular_tol = 1e-8;
  // H_j(0) multiplying e^{V_j}; empty means all ones
  Eigen::VectorXd H;
};

struct CorrectionProfile {
  int l = 0;
  double r_out = 0.0;
  std::vector<double> t;  // uniform nodes in ln r
  Eigen::MatrixXd g;      // n x nodes
  bool projected = false;
  double multiplier = 0.0;  // range-correction coefficient in the projected solve
  double sigma_min_ratio = 0.0;  // on the coarsest grid, where the projection decision is made
  double refinement_change = 0.0;
  int nodes() const { return static_cast<int>(t.size()); }
  double value(int i, double r) const;
  double derivative(int i, double r) const;  // d/dr
  double sup_ratio(double eps, double exponent) const;  // sup |g|/(ε(1+r)^p) over nodes
};

CorrectionProfile solve_frequency(const RadialBubble& b, int l, const RadialSource& source, double r_out,
                                  const FrequencyOptions& opt = {});

// ℓ = 1 source -ε Σ_j a_ij ∂_s ln h_j(0) r e^{V_j} along direction s ∈ {0, 1}
RadialSource first_order_source(const RadialBubble& b, const HLocalData& h, double eps, int s);

struct SecondOrderSources {
  RadialSource l0, l2_cos, l2_sin;
};

// g1x, g1y: ℓ = 1 profiles for the x- and y-gradients.
SecondOrderSources second_order_source(const RadialBubble& b, const HLocalData& h, double eps,
                                       const CorrectionProfile& g1x, const CorrectionProfile& g1y);

struct BCoefficient {
  Eigen::VectorXd b;
  Eigen::VectorXd ratio;  // b / (ε² ln(1/ε))
  bool regime_warning = false;
};

// 2π ∫_0^R e^{V_j} Z_{0,j} r³ dr
double z0_moment(const RadialBubble& b, int j, double R);

BCoefficient b_coefficient(const RadialBubble& b, const HLocalData& h, double eps, double r_out);

struct KernelProjection {
  double b0 = 0, b1 = 0, b2 = 0;
};

// field sampled on g, one K x M matrix per component
KernelProjection project_kernels(const PolarField& field, const PolarGrid& g, const RadialBubble& b);

// Z_l sampled on a polar grid
PolarField sample_kernel(const RadialBubble& b, const PolarGrid& g, int l);

}  // namespace liouville

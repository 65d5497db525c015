#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

namespace liouville {

// Tensor grid in (t = ln r, θ) over the annulus r_min ≤ r ≤ r_max. Simpson in
// t (odd node count) and the periodic trapezoid rule in θ; the area element is
// r² dt dθ.
struct PolarGrid {
  double t0 = 0, t1 = 0;
  int K = 0, M = 0;

  PolarGrid() = default;
  PolarGrid(double r_min, double r_max, int nt, int ntheta)
      : t0(std::log(r_min)), t1(std::log(r_max)), K(nt | 1), M(ntheta) {}

  double ht() const { return (t1 - t0) / (K - 1); }
  double t(int k) const { return t0 + ht() * k; }
  double r(int k) const { return std::exp(t(k)); }
  double theta(int m) const { return 2 * std::numbers::pi * m / M; }
  double simpson(int k) const {
    if (k == 0 || k == K - 1) return 1.0 / 3.0;
    return (k % 2) ? 4.0 / 3.0 : 2.0 / 3.0;
  }
  // quadrature weight of node (k, m) for ∫ f dA
  double weight(int k) const { return simpson(k) * ht() * r(k) * r(k) * (2 * std::numbers::pi / M); }
  // radial weight for ∫ f(r) r dr
  double radial_weight(int k) const { return simpson(k) * ht() * r(k) * r(k); }
};

// n component samples on a PolarGrid, each K x M
using PolarField = std::vector<Eigen::MatrixXd>;

inline double integrate(const PolarGrid& g, const Eigen::MatrixXd& f) {
  double s = 0;
  for (int k = 0; k < g.K; ++k) s += g.weight(k) * f.row(k).sum();
  return s;
}

inline double pair(const PolarGrid& g, const PolarField& a, const PolarField& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += integrate(g, a[i].cwiseProduct(b[i]));
  return s;
}

}  // namespace liouville

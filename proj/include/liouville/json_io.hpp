#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "liouville/coupling.hpp"
#include "liouville/torus.hpp"

namespace liouville {

using Json = nlohmann::json;

struct RunConfig {
  CouplingMatrix A;
  int N = 1;
  Eigen::VectorXd rho;       // on Γ_N; projected from rho_ray when only the ray is given
  Eigen::VectorXd rho_ray;
  Eigen::VectorXd sigma;     // bubble match target; defaults to ρ/(2πN)
  Eigen::VectorXd alpha;     // bubble solve initial values, or the match seed
  PointConfig points;
  HField h;
  // optional local weight data at the blowup point, overriding h in the local checks
  std::vector<Vec2> local_grad;
  std::vector<Mat2> local_hess;
  std::vector<double> eps_list;
  std::vector<double> tau_fractions{0.2, 0.1, 0.05};
  double tau = 0.0;
  int grid = 512;
  double R = 100.0;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int threads = 1;

  int n() const { return A.n(); }
};

// Throws ConfigurationError with the offending key.
RunConfig parse_config(const Json& j);
RunConfig load_config(const std::string& path);

// Doubles at 17 significant digits, keys sorted, NaN and ±inf as null.
std::string dump_json(const Json& j, int indent = 2);
void write_file(const std::string& path, const std::string& text);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);  // row-major nested arrays
Json to_json(const Vec2& v);

}  // namespace liouville

#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "liouville/errors.hpp"
#include "liouville/json_io.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

// the message must name the key that failed
void rejects(const std::string& text, const std::string& key) {
  try {
    parse_config(Json::parse(text));
    FAIL("accepted: " << text);
  } catch (const ConfigurationError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(key) != std::string::npos, e.what());
  }
}

}  // namespace

TEST_CASE("minimal config and defaults") {
  const RunConfig c = parse_config(Json::parse(R"({"coupling": [[1]]})"));
  CHECK(c.n() == 1);
  CHECK(c.N == 1);
  CHECK(c.rho.size() == 0);
  CHECK(c.grid == 512);
  CHECK(c.R == 100.0);
  CHECK(c.seed == 0);
  CHECK(c.tau_fractions == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(c.h.h(0, Vec2(0.3, 0.1)) == 1.0);
}

TEST_CASE("coupling in both layouts") {
  const RunConfig a = parse_config(Json::parse(R"({"coupling": [[0, 1], [1, 0]]})"));
  const RunConfig b = parse_config(Json::parse(R"({"coupling": {"n": 2, "entries": [0, 1, 1, 0]}})"));
  CHECK(a.A.entries() == b.A.entries());
  rejects(R"({"coupling": {"n": 2, "entries": [0, 1, 1]}})", "coupling.entries");
  rejects(R"({"coupling": {"entries": [1]}})", "coupling.n");
}

TEST_CASE("rho ray is projected onto the hypersurface") {
  const RunConfig c = parse_config(Json::parse(R"({"coupling": [[0, 1], [1, 0]], "rho_ray": [3, 6]})"));
  REQUIRE(c.rho.size() == 2);
  CHECK(c.rho[1] / c.rho[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(lambda_in(c.A, ParamVector{c.rho, c.N})) <= 1e-10 * c.rho.squaredNorm());
  // for the swap matrix Λ = 8π(ρ1+ρ2) - 2ρ1ρ2 vanishes at s = 8π(3+6)/(2·18) = 2π
  CHECK(c.rho[0] == doctest::Approx(6 * kPi).epsilon(1e-12));
  CHECK((c.sigma - c.rho / (2 * kPi)).norm() <= 1e-14);
  // an explicit rho wins over the ray
  const RunConfig d =
      parse_config(Json::parse(R"({"coupling": [[0, 1], [1, 0]], "rho": [1, 2], "rho_ray": [3, 6], "sigma": [5, 7]})"));
  CHECK(d.rho[0] == 1.0);
  CHECK(d.sigma[1] == 7.0);
}

TEST_CASE("points, N and sigma default") {
  const RunConfig c = parse_config(Json::parse(R"({"coupling": [[1]], "rho": [16], "points": [[0, 0], [0.5, 0.5]]})"));
  CHECK(c.N == 2);
  CHECK(c.sigma[0] == doctest::Approx(16 / (4 * kPi)));
  rejects(R"({"coupling": [[1]], "N": 3, "points": [[0, 0]]})", "N");
  rejects(R"({"coupling": [[1]], "points": [[0, 0, 1]]})", "points");
}

TEST_CASE("weight field and local data") {
  const RunConfig c = parse_config(Json::parse(R"({
    "coupling": [[0, 1], [1, 0]],
    "h": [{"coeffs": {"c0": 0.5, "modes": [[1, 0, 0.3, 0]]}}, {"c0": 0, "modes": [[0, 1, 0, 0.2]]}],
    "local": {"grad": [[2, 0], [-1, 0.5]], "hess": [[[1, 0], [0, 2]], [[0, 1], [1, 0]]]}
  })"));
  const Vec2 x(0.1, 0.3);
  CHECK(c.h.ln_h(0, x) == doctest::Approx(0.5 + 0.3 * std::cos(2 * kPi * 0.1)).epsilon(1e-14));
  CHECK(c.h.ln_h(1, x) == doctest::Approx(0.2 * std::sin(2 * kPi * 0.3)).epsilon(1e-14));
  REQUIRE(c.local_grad.size() == 2);
  CHECK(c.local_grad[1] == Vec2(-1, 0.5));
  REQUIRE(c.local_hess.size() == 2);
  CHECK(c.local_hess[0](1, 1) == 2.0);
  CHECK(c.local_hess[1](0, 1) == 1.0);
  rejects(R"({"coupling": [[1]], "h": [{"modes": [[1.5, 0, 1, 0]]}]})", "h[0].modes");
  rejects(R"({"coupling": [[1]], "h": [{}, {}]})", "h");
  rejects(R"({"coupling": [[1]], "local": {"grad": [[1, 2, 3]]}})", "local.grad");
}

TEST_CASE("scalar fields are validated") {
  rejects(R"({})", "coupling");
  rejects(R"({"coupling": [[1, 2]]})", "coupling");
  rejects(R"({"coupling": [[1]], "rho": [1, 2]})", "rho");
  rejects(R"({"coupling": [[1]], "eps_list": [0.1, -0.1]})", "eps_list");
  rejects(R"({"coupling": [[1]], "grid": 8})", "grid");
  rejects(R"({"coupling": [[1]], "R": -1})", "R");
  rejects(R"({"coupling": [[1]], "tol": "small"})", "tol");
  rejects(R"({"coupling": [[1]], "seed": -3})", "seed");
  rejects(R"({"coupling": [[1]], "threads": 0})", "threads");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigurationError);
}

TEST_CASE("deterministic JSON output") {
  Json j;
  j["zeta"] = 0.1;
  j["alpha"] = Json::array({1.0 / 3.0, std::numeric_limits<double>::quiet_NaN(), 2});
  j["mid"] = {{"b", std::numeric_limits<double>::infinity()}, {"a", true}};
  const std::string s = dump_json(j);
  CHECK(s.find("\"alpha\"") < s.find("\"mid\""));
  CHECK(s.find("\"mid\"") < s.find("\"zeta\""));
  CHECK(s.find("0.33333333333333331") != std::string::npos);
  CHECK(s.find("0.10000000000000001") != std::string::npos);
  CHECK(s.find("null, 2]") != std::string::npos);
  CHECK(s.find("\"b\": null") != std::string::npos);
  // round trip recovers the exact doubles
  const Json back = Json::parse(s);
  CHECK(back["alpha"][0].get<double>() == 1.0 / 3.0);
  CHECK(back["zeta"].get<double>() == 0.1);
  CHECK(dump_json(back) == s);
  CHECK(dump_json(Json::object(), 0) == "{}\n");
}

TEST_CASE("Eigen conversions") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Json jm = to_json(m);
  CHECK(jm.size() == 2);
  CHECK(jm[1][0].get<double>() == 4.0);
  CHECK(to_json(Eigen::VectorXd(Eigen::VectorXd::LinSpaced(3, 0, 1)))[1].get<double>() == 0.5);
  CHECK(to_json(Vec2(0.25, -1))[1].get<double>() == -1.0);
}

#include "liouville/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "liouville/errors.hpp"

namespace liouville {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigurationError("config: " + key + ": " + what);
}

double number(const Json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

Eigen::VectorXd vector(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) bad(key, "expected a non-empty array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) v[k] = number(j[k], key);
  return v;
}

std::vector<double> list(const Json& j, const std::string& key) {
  Eigen::VectorXd v = vector(j, key);
  return {v.data(), v.data() + v.size()};
}

LogFourier log_fourier(const Json& j, const std::string& key) {
  if (!j.is_object()) bad(key, "expected an object");
  const Json& c = j.contains("coeffs") ? j.at("coeffs") : j;
  LogFourier f;
  if (c.contains("c0")) f.c0 = number(c.at("c0"), key + ".c0");
  if (c.contains("modes")) {
    const Json& m = c.at("modes");
    if (!m.is_array()) bad(key + ".modes", "expected an array");
    for (const Json& e : m) {
      if (!e.is_array() || e.size() != 4) bad(key + ".modes", "each mode is [k1, k2, cos, sin]");
      if (!e[0].is_number_integer() || !e[1].is_number_integer()) bad(key + ".modes", "wave numbers must be integers");
      f.modes.push_back({e[0].get<int>(), e[1].get<int>(), number(e[2], key), number(e[3], key)});
    }
  }
  return f;
}

void write_value(std::ostringstream& os, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        os << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
        write_value(os, it.value(), indent, depth + 1);
      }
      os << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // numeric arrays stay on one line
      bool flat = true;
      for (const Json& e : j) flat = flat && e.is_primitive();
      os << '[';
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) os << (flat && indent > 0 ? ", " : ",");
        if (!flat) os << pad;
        write_value(os, j[k], indent, depth + 1);
      }
      if (!flat) os << close;
      os << ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        os << "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      os << buf;
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

RunConfig parse_config(const Json& j) {
  if (!j.is_object()) bad("<root>", "expected an object");
  RunConfig c;
  if (!j.contains("coupling")) bad("coupling", "required");
  {
    const Json& a = j.at("coupling");
    std::vector<std::vector<double>> rows;
    if (a.is_object()) {
      // {"n": n, "entries": row-major}
      if (!a.contains("n") || !a.at("n").is_number_integer() || a.at("n").get<int>() < 1)
        bad("coupling.n", "expected a positive integer");
      if (!a.contains("entries")) bad("coupling.entries", "required");
      const auto m = static_cast<std::size_t>(a.at("n").get<int>());
      Eigen::VectorXd e = vector(a.at("entries"), "coupling.entries");
      if (static_cast<std::size_t>(e.size()) != m * m) bad("coupling.entries", "expected n*n entries");
      for (std::size_t r = 0; r < m; ++r) rows.emplace_back(e.data() + r * m, e.data() + (r + 1) * m);
    } else {
      if (!a.is_array() || a.empty()) bad("coupling", "expected a square array of rows");
      for (const Json& r : a) {
        Eigen::VectorXd v = vector(r, "coupling");
        if (static_cast<std::size_t>(v.size()) != a.size()) bad("coupling", "matrix must be square");
        rows.emplace_back(v.data(), v.data() + v.size());
      }
    }
    c.A = CouplingMatrix::from_rows(rows);
  }
  const int n = c.A.n();
  auto sized = [&](const char* key) {
    Eigen::VectorXd v = vector(j.at(key), key);
    if (v.size() != n) bad(key, "expected " + std::to_string(n) + " entries");
    return v;
  };

  if (j.contains("points")) {
    const Json& p = j.at("points");
    if (!p.is_array() || p.empty()) bad("points", "expected a non-empty array of [x, y]");
    for (const Json& e : p) {
      Eigen::VectorXd v = vector(e, "points");
      if (v.size() != 2) bad("points", "each point is [x, y]");
      c.points.q.push_back(Vec2(v[0], v[1]));
    }
    c.N = c.points.N();
  }
  if (j.contains("N")) {
    if (!j.at("N").is_number_integer() || j.at("N").get<int>() < 1) bad("N", "expected a positive integer");
    const int N = j.at("N").get<int>();
    if (!c.points.q.empty() && N != c.points.N()) bad("N", "does not match the number of points");
    c.N = N;
  }

  if (j.contains("rho")) c.rho = sized("rho");
  if (j.contains("rho_ray")) c.rho_ray = sized("rho_ray");
  if (c.rho.size() == 0 && c.rho_ray.size() > 0) c.rho = gamma_project(c.A, c.rho_ray, c.N).rho;
  if (j.contains("sigma")) c.sigma = sized("sigma");
  else if (c.rho.size() > 0) c.sigma = c.rho / (2.0 * std::numbers::pi * c.N);
  if (j.contains("alpha")) c.alpha = sized("alpha");

  if (j.contains("h")) {
    const Json& h = j.at("h");
    if (!h.is_array() || static_cast<int>(h.size()) != n) bad("h", "expected one entry per component");
    std::vector<LogFourier> comps;
    for (std::size_t i = 0; i < h.size(); ++i) comps.push_back(log_fourier(h[i], "h[" + std::to_string(i) + "]"));
    c.h = HField(std::move(comps));
    for (int i = 0; i < n; ++i)
      if (!(c.h.min_on_grid(i) > 0)) bad("h", "h must be positive");
  } else {
    c.h = HField::constant(n);
  }

  if (j.contains("local")) {
    const Json& l = j.at("local");
    if (!l.is_object()) bad("local", "expected an object");
    if (l.contains("grad")) {
      const Json& gr = l.at("grad");
      if (!gr.is_array() || static_cast<int>(gr.size()) != n) bad("local.grad", "expected one [gx, gy] per component");
      for (const Json& e : gr) {
        Eigen::VectorXd v = vector(e, "local.grad");
        if (v.size() != 2) bad("local.grad", "expected [gx, gy]");
        c.local_grad.push_back(Vec2(v[0], v[1]));
      }
    }
    if (l.contains("hess")) {
      const Json& he = l.at("hess");
      if (!he.is_array() || static_cast<int>(he.size()) != n) bad("local.hess", "expected one 2x2 matrix per component");
      for (const Json& e : he) {
        if (!e.is_array() || e.size() != 2) bad("local.hess", "expected [[a, b], [c, d]]");
        Mat2 m;
        for (int r = 0; r < 2; ++r) {
          Eigen::VectorXd v = vector(e[r], "local.hess");
          if (v.size() != 2) bad("local.hess", "expected [[a, b], [c, d]]");
          m.row(r) = v.transpose();
        }
        c.local_hess.push_back(m);
      }
    }
  }
  if (j.contains("eps_list")) c.eps_list = list(j.at("eps_list"), "eps_list");
  if (j.contains("tau_fractions")) c.tau_fractions = list(j.at("tau_fractions"), "tau_fractions");
  for (double e : c.eps_list)
    if (!(e > 0)) bad("eps_list", "entries must be positive");
  if (j.contains("tau")) c.tau = number(j.at("tau"), "tau");
  if (j.contains("grid")) {
    if (!j.at("grid").is_number_integer() || j.at("grid").get<int>() < 16) bad("grid", "expected an integer >= 16");
    c.grid = j.at("grid").get<int>();
  }
  if (j.contains("R")) c.R = number(j.at("R"), "R");
  if (j.contains("tol")) c.tol = number(j.at("tol"), "tol");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) bad("seed", "expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    if (!j.at("threads").is_number_integer() || j.at("threads").get<int>() < 1) bad("threads", "expected a positive integer");
    c.threads = j.at("threads").get<int>();
  }
  if (c.R <= 0) bad("R", "must be positive");
  if (c.tol <= 0) bad("tol", "must be positive");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigurationError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

std::string dump_json(const Json& j, int indent) {
  std::ostringstream os;
  write_value(os, j, indent, 0);
  os << '\n';
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write " + path);
  out << text;
}

Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

Json to_json(const Vec2& v) { return Json::array({v[0], v[1]}); }

}  // namespace liouville

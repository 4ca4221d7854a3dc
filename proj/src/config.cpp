#include "ersc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ersc {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key()))
      throw ValidationError("config: unknown key '" + item.key() + "' in '" + where + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
  }
}

Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || static_cast<int>(v.size()) > kMaxDim)
    throw ValidationError("config: vector length must be in [1, 8]");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<double> from_vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, const std::string& what) {
  if (rows.empty()) return {};
  const auto cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ValidationError("config: ragged matrix in " + what);
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

json from_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(r);
  }
  return rows;
}

json monomials_to_json(const std::vector<Monomial>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back({{"coef", m.coef}, {"x", m.x_pow}, {"u", m.u_pow}});
  return out;
}

std::vector<Monomial> monomials_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError("config: '" + where + "' must be a list of monomials");
  std::vector<Monomial> out;
  for (const auto& e : j) {
    check_keys(e, where, {"coef", "x", "u"});
    Monomial m;
    read(e, "coef", m.coef, where);
    read(e, "x", m.x_pow, where);
    read(e, "u", m.u_pow, where);
    out.push_back(std::move(m));
  }
  return out;
}

PolynomialModelSpec default_polynomial() {
  PolynomialModelSpec s;
  s.dim = 1;
  s.drift = {{Monomial{-1.0, {1}, {}}}};
  s.sigma = Eigen::MatrixXd::Identity(1, 1);
  s.cost = {Monomial{0.375, {2}, {}}};
  s.controls = {{0.0}};
  return s;
}

std::string scheme_name(DriftScheme s) { return s == DriftScheme::upwind ? "upwind" : "hybrid"; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError("config: " + msg);
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  c.model.poly = default_polynomial();
  check_keys(j, "config", {"model", "grid", "solver", "perturb", "sweep", "game", "simulation",
                           "rep_check", "assumptions", "variational", "output"});

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"name", "a", "sigma", "q", "c", "u_max", "n_controls", "arrival_rates",
                            "service_rates", "l_vec", "cost_weights", "idle_weights",
                            "simplex_divisions", "cone_delta", "dim", "drift", "sigma_matrix",
                            "cost", "controls"});
    read(m, "name", c.model.name, "model");
    read(m, "a", c.model.ou.a, "model");
    read(m, "sigma", c.model.ou.sigma, "model");
    read(m, "q", c.model.ou.q, "model");
    read(m, "c", c.model.ou.c, "model");
    read(m, "u_max", c.model.ou.u_max, "model");
    read(m, "n_controls", c.model.ou.n_controls, "model");
    auto read3 = [&](const char* key, Eigen::Vector3d& v) {
      std::vector<double> tmp;
      read(m, key, tmp, "model");
      if (tmp.empty()) return;
      require(tmp.size() == 3, std::string("model.") + key + " needs 3 entries");
      v = Eigen::Vector3d(tmp[0], tmp[1], tmp[2]);
    };
    read3("arrival_rates", c.model.w.arrival_rates);
    read3("l_vec", c.model.w.l_vec);
    read3("cost_weights", c.model.w.cost_weights);
    {
      std::vector<double> tmp;
      read(m, "idle_weights", tmp, "model");
      if (!tmp.empty()) {
        require(tmp.size() == 2, "model.idle_weights needs 2 entries");
        c.model.w.idle_weights = Eigen::Vector2d(tmp[0], tmp[1]);
      }
      std::vector<std::vector<double>> mu;
      read(m, "service_rates", mu, "model");
      if (!mu.empty()) {
        const Eigen::MatrixXd mm = to_matrix(mu, "model.service_rates");
        require(mm.rows() == 3 && mm.cols() == 2, "model.service_rates must be 3 x 2");
        c.model.w.service_rates = mm;
      }
    }
    read(m, "simplex_divisions", c.model.w.simplex_divisions, "model");
    read(m, "cone_delta", c.model.w.cone_delta, "model");
    read(m, "dim", c.model.poly.dim, "model");
    if (m.contains("drift")) {
      c.model.poly.drift.clear();
      require(m["drift"].is_array(), "model.drift must be a list of polynomials");
      for (const auto& p : m["drift"]) c.model.poly.drift.push_back(monomials_from_json(p, "model.drift"));
    }
    if (m.contains("sigma_matrix")) {
      std::vector<std::vector<double>> s;
      read(m, "sigma_matrix", s, "model");
      c.model.poly.sigma = to_matrix(s, "model.sigma_matrix");
    }
    if (m.contains("cost")) c.model.poly.cost = monomials_from_json(m["cost"], "model.cost");
    read(m, "controls", c.model.poly.controls, "model");
    require(c.model.name == "ou_lq" || c.model.name == "w_network" || c.model.name == "polynomial",
            "unknown model name '" + c.model.name + "' (expected ou_lq, w_network or polynomial)");
  }

  if (j.contains("grid")) {
    check_keys(j["grid"], "grid", {"radii", "counts"});
    read(j["grid"], "radii", c.grid.radii, "grid");
    read(j["grid"], "counts", c.grid.counts, "grid");
  }
  require(c.grid.radii.size() == c.grid.counts.size() && !c.grid.radii.empty(),
          "grid.radii and grid.counts must be non-empty and of equal length");

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"tol", "max_iter", "scheme", "eigen_control"});
    read(s, "tol", c.solver.tol, "solver");
    read(s, "max_iter", c.solver.max_iter, "solver");
    read(s, "eigen_control", c.solver.eigen_control, "solver");
    std::string scheme = scheme_name(c.solver.scheme);
    read(s, "scheme", scheme, "solver");
    require(scheme == "upwind" || scheme == "hybrid", "solver.scheme must be upwind or hybrid");
    c.solver.scheme = scheme == "upwind" ? DriftScheme::upwind : DriftScheme::hybrid;
  }
  require(c.solver.tol > 0.0, "solver.tol must be > 0");
  require(c.solver.max_iter >= 1, "solver.max_iter must be >= 1");

  if (j.contains("perturb")) {
    const json& p = j["perturb"];
    check_keys(p, "perturb", {"C3", "mode", "constant", "quadratic", "collar"});
    read(p, "C3", c.perturb.C3, "perturb");
    read(p, "mode", c.perturb.mode, "perturb");
    read(p, "constant", c.perturb.constant, "perturb");
    read(p, "quadratic", c.perturb.quadratic, "perturb");
    read(p, "collar", c.perturb.collar, "perturb");
  }
  require(c.perturb.C3 > 0.0 && c.perturb.C3 < 1.0, "perturb.C3 must lie in (0, 1)");
  require(c.perturb.mode == "explicit" || c.perturb.mode == "blend",
          "perturb.mode must be explicit or blend");
  require(c.perturb.collar > 0.0, "perturb.collar must be > 0");
  const double eps0 = (1.0 - c.perturb.C3) / 8.0;

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"epsilon", "kappa", "l", "L_slope", "L_intercept"});
    read(s, "epsilon", c.sweep.epsilon, "sweep");
    read(s, "kappa", c.sweep.kappa, "sweep");
    read(s, "l", c.sweep.l, "sweep");
    read(s, "L_slope", c.sweep.L_slope, "sweep");
    read(s, "L_intercept", c.sweep.L_intercept, "sweep");
  }
  for (const double e : c.sweep.epsilon) {
    if (!(e >= 0.0 && e < eps0)) {
      std::ostringstream msg;
      msg << "sweep.epsilon entry " << e << " violates 0 <= epsilon < eps0 = (1-C3)/8 = " << eps0;
      throw ValidationError("config: " + msg.str());
    }
  }
  for (const double k : c.sweep.kappa) require(k > 0.0 && k <= 1.0, "sweep.kappa entries must lie in (0, 1]");
  for (std::size_t i = 0; i < c.sweep.l.size(); ++i) {
    require(c.sweep.l[i] > 0.0, "sweep.l entries must be > 0");
    if (i) require(c.sweep.l[i] > c.sweep.l[i - 1], "sweep.l must be increasing");
  }
  require(c.sweep.L_slope > 0.0, "sweep.L_slope must be > 0");

  if (j.contains("game")) {
    const json& g = j["game"];
    check_keys(g, "game", {"epsilon", "l", "L_star", "isaacs_samples"});
    read(g, "epsilon", c.game.epsilon, "game");
    read(g, "l", c.game.l, "game");
    read(g, "L_star", c.game.L_star, "game");
    read(g, "isaacs_samples", c.game.isaacs_samples, "game");
  }
  if (!(c.game.epsilon >= 0.0 && c.game.epsilon < eps0)) {
    std::ostringstream msg;
    msg << "game.epsilon = " << c.game.epsilon << " violates 0 <= epsilon < eps0 = (1-C3)/8 = " << eps0;
    throw ValidationError("config: " + msg.str());
  }
  require(c.game.l > 0.0 && c.game.L_star > 0.0, "game.l and game.L_star must be > 0");
  require(c.game.isaacs_samples >= 0, "game.isaacs_samples must be >= 0");

  const int dim = c.model.name == "w_network" ? 3 : c.model.name == "polynomial" ? c.model.poly.dim : 1;
  c.simulation.sim.x0 = Vec::Zero(dim);
  c.simulation.sim.T = 8.0;
  c.simulation.sim.n_paths = 10000;
  c.simulation.sim.dt = 1e-3;
  if (j.contains("simulation")) {
    const json& s = j["simulation"];
    check_keys(s, "simulation", {"dt", "T", "n_paths", "seed", "x0", "antithetic", "workers",
                                 "shells", "truncation"});
    auto& sim = c.simulation.sim;
    read(s, "dt", sim.dt, "simulation");
    read(s, "T", sim.T, "simulation");
    read(s, "n_paths", sim.n_paths, "simulation");
    read(s, "seed", sim.seed, "simulation");
    read(s, "antithetic", sim.antithetic, "simulation");
    read(s, "workers", sim.workers, "simulation");
    std::vector<double> x0;
    read(s, "x0", x0, "simulation");
    if (!x0.empty()) sim.x0 = to_vec(x0);
    read(s, "shells", c.simulation.shells, "simulation");
    if (s.contains("truncation") && !s["truncation"].is_null()) {
      double t = 0.0;
      read(s, "truncation", t, "simulation");
      c.simulation.truncation = t;
    }
  }
  c.simulation.sim.validate(dim);

  c.rep_check.points = {Vec::Constant(dim, 1.5), Vec::Constant(dim, 2.0)};
  if (j.contains("rep_check")) {
    const json& r = j["rep_check"];
    check_keys(r, "rep_check", {"R", "points", "T", "dt", "n_paths", "sampling"});
    read(r, "R", c.rep_check.R, "rep_check");
    read(r, "T", c.rep_check.T, "rep_check");
    read(r, "dt", c.rep_check.dt, "rep_check");
    read(r, "n_paths", c.rep_check.n_paths, "rep_check");
    read(r, "sampling", c.rep_check.sampling, "rep_check");
    if (r.contains("points")) {
      std::vector<std::vector<double>> pts;
      read(r, "points", pts, "rep_check");
      c.rep_check.points.clear();
      for (const auto& p : pts) {
        require(static_cast<int>(p.size()) == dim, "rep_check.points have the wrong dimension");
        c.rep_check.points.push_back(to_vec(p));
      }
    }
  }
  require(c.rep_check.R > 0.0, "rep_check.R must be > 0");
  require(c.rep_check.sampling == "ground" || c.rep_check.sampling == "plain",
          "rep_check.sampling must be ground or plain");
  for (const auto& p : c.rep_check.points)
    require(p.norm() >= c.rep_check.R, "rep_check.points must lie outside the radius-R ball");

  c.assumptions.Q = 0.1 * Mat::Identity(dim, dim);
  if (j.contains("assumptions")) {
    const json& a = j["assumptions"];
    check_keys(a, "assumptions", {"Q", "C1", "C2", "C3", "hbar_constant", "hbar_quadratic",
                                  "sample_radius", "sample_counts"});
    if (a.contains("Q")) {
      std::vector<std::vector<double>> q;
      read(a, "Q", q, "assumptions");
      const Eigen::MatrixXd qm = to_matrix(q, "assumptions.Q");
      require(qm.rows() == dim && qm.cols() == dim, "assumptions.Q must be dim x dim");
      c.assumptions.Q = qm;
    }
    read(a, "C1", c.assumptions.constants.C1, "assumptions");
    read(a, "C2", c.assumptions.constants.C2, "assumptions");
    read(a, "C3", c.assumptions.constants.C3, "assumptions");
    read(a, "hbar_constant", c.assumptions.hbar_constant, "assumptions");
    read(a, "hbar_quadratic", c.assumptions.hbar_quadratic, "assumptions");
    read(a, "sample_radius", c.assumptions.sample_radius, "assumptions");
    read(a, "sample_counts", c.assumptions.sample_counts, "assumptions");
  }
  require(c.assumptions.constants.C3 > 0.0 && c.assumptions.constants.C3 < 1.0,
          "assumptions.C3 must lie in (0, 1)");
  require(c.assumptions.sample_counts >= 2 && c.assumptions.sample_radius > 0.0,
          "assumptions sample grid needs counts >= 2 and radius > 0");

  if (j.contains("variational")) {
    const json& v = j["variational"];
    check_keys(v, "variational", {"n_spaces", "max_atoms", "f_range", "seed"});
    read(v, "n_spaces", c.variational.n_spaces, "variational");
    read(v, "max_atoms", c.variational.max_atoms, "variational");
    read(v, "f_range", c.variational.f_range, "variational");
    read(v, "seed", c.variational.seed, "variational");
  }
  require(c.variational.n_spaces >= 1 && c.variational.max_atoms >= 1 && c.variational.f_range > 0.0,
          "variational block out of range");

  if (j.contains("output")) {
    check_keys(j["output"], "output", {"directory", "formats"});
    read(j["output"], "directory", c.output.directory, "output");
    read(j["output"], "formats", c.output.formats, "output");
  }
  for (const auto& f : c.output.formats)
    require(f == "csv" || f == "json", "output.formats entries must be csv or json");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

std::filesystem::path write_canonical_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / "config.json";
  std::ofstream os(path, std::ios::binary);
  os << config.to_json().dump(2) << '\n';
  if (!os) throw IoError("cannot write " + path.string());
  return path;
}

json RunConfig::to_json() const {
  json j;
  json m = {{"name", model.name}};
  if (model.name == "ou_lq") {
    m["a"] = model.ou.a;
    m["sigma"] = model.ou.sigma;
    m["q"] = model.ou.q;
    m["c"] = model.ou.c;
    m["u_max"] = model.ou.u_max;
    m["n_controls"] = model.ou.n_controls;
  } else if (model.name == "w_network") {
    const auto& w = model.w;
    m["arrival_rates"] = {w.arrival_rates[0], w.arrival_rates[1], w.arrival_rates[2]};
    m["service_rates"] = from_matrix(w.service_rates);
    m["l_vec"] = {w.l_vec[0], w.l_vec[1], w.l_vec[2]};
    m["cost_weights"] = {w.cost_weights[0], w.cost_weights[1], w.cost_weights[2]};
    m["idle_weights"] = {w.idle_weights[0], w.idle_weights[1]};
    m["simplex_divisions"] = w.simplex_divisions;
    m["cone_delta"] = w.cone_delta;
  } else {
    m["dim"] = model.poly.dim;
    json drift = json::array();
    for (const auto& p : model.poly.drift) drift.push_back(monomials_to_json(p));
    m["drift"] = drift;
    m["sigma_matrix"] = from_matrix(model.poly.sigma);
    m["cost"] = monomials_to_json(model.poly.cost);
    m["controls"] = model.poly.controls;
  }
  j["model"] = m;
  j["grid"] = {{"radii", grid.radii}, {"counts", grid.counts}};
  j["solver"] = {{"tol", solver.tol},
                 {"max_iter", solver.max_iter},
                 {"scheme", scheme_name(solver.scheme)},
                 {"eigen_control", solver.eigen_control}};
  j["perturb"] = {{"C3", perturb.C3},
                  {"mode", perturb.mode},
                  {"constant", perturb.constant},
                  {"quadratic", perturb.quadratic},
                  {"collar", perturb.collar}};
  j["sweep"] = {{"epsilon", sweep.epsilon},
                {"kappa", sweep.kappa},
                {"l", sweep.l},
                {"L_slope", sweep.L_slope},
                {"L_intercept", sweep.L_intercept}};
  j["game"] = {{"epsilon", game.epsilon},
               {"l", game.l},
               {"L_star", game.L_star},
               {"isaacs_samples", game.isaacs_samples}};
  const auto& s = simulation.sim;
  j["simulation"] = {{"dt", s.dt},
                     {"T", s.T},
                     {"n_paths", s.n_paths},
                     {"seed", s.seed},
                     {"x0", from_vec(s.x0)},
                     {"antithetic", s.antithetic},
                     {"workers", s.workers},
                     {"shells", simulation.shells},
                     {"truncation", simulation.truncation ? json(*simulation.truncation) : json(nullptr)}};
  json pts = json::array();
  for (const auto& p : rep_check.points) pts.push_back(from_vec(p));
  j["rep_check"] = {{"R", rep_check.R},
                    {"points", pts},
                    {"T", rep_check.T},
                    {"dt", rep_check.dt},
                    {"sampling", rep_check.sampling},
                    {"n_paths", rep_check.n_paths}};
  j["assumptions"] = {{"Q", from_matrix(Eigen::MatrixXd(assumptions.Q))},
                      {"C1", assumptions.constants.C1},
                      {"C2", assumptions.constants.C2},
                      {"C3", assumptions.constants.C3},
                      {"hbar_constant", assumptions.hbar_constant},
                      {"hbar_quadratic", assumptions.hbar_quadratic},
                      {"sample_radius", assumptions.sample_radius},
                      {"sample_counts", assumptions.sample_counts}};
  j["variational"] = {{"n_spaces", variational.n_spaces},
                      {"max_atoms", variational.max_atoms},
                      {"f_range", variational.f_range},
                      {"seed", variational.seed}};
  j["output"] = {{"directory", output.directory}, {"formats", output.formats}};
  return j;
}

std::string RunConfig::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

DiffusionModel build_model(const ModelBlock& block) {
  if (block.name == "ou_lq")
    return builtin_ou_lq(block.ou.a, block.ou.sigma, block.ou.q, block.ou.c, block.ou.u_max,
                         block.ou.n_controls);
  if (block.name == "w_network") return builtin_w_network(block.w);
  if (block.name == "polynomial") return polynomial_model(block.poly);
  throw ValidationError("unknown model '" + block.name + "'");
}

Grid build_grid(const GridBlock& block) { return build_grid(block.radii, block.counts); }

}  // namespace ersc

#include "ersc/run.hpp"

#include "ersc/eigensolve.hpp"
#include "ersc/game.hpp"
#include "ersc/hjb.hpp"
#include "ersc/perturb.hpp"
#include "ersc/simulate.hpp"
#include "ersc/variational.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace ersc {

using nlohmann::json;

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds = {"eigen",    "hjb",        "game",
                                                "sweep-eps", "sweep-kappa", "simulate",
                                                "verify-var", "check-assumptions", "rep-check"};
  return cmds;
}

int exit_status_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  if (dynamic_cast<const ReducibleError*>(&e)) return kExitConvergence;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitInternal;
}

const char* error_category(const std::exception& e) {
  switch (exit_status_for(e)) {
    case kExitUsage: return "usage";
    case kExitValidation: return "validation";
    case kExitConvergence: return dynamic_cast<const ReducibleError*>(&e) ? "reducible" : "convergence";
    case kExitIo: return "io";
    default: return "internal";
  }
}

namespace {

struct Context {
  const RunConfig& cfg;
  DiffusionModel model;
  Grid grid;
  HjbOptions hjb;
};

std::vector<std::string> coord_header(int dim) {
  std::vector<std::string> h;
  for (int k = 0; k < dim; ++k) h.push_back("x" + std::to_string(k));
  return h;
}

std::vector<double> coords(const Vec& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

PerturbationFamily make_family(const Context& ctx) {
  const double k0 = ctx.cfg.perturb.constant;
  const double k2 = ctx.cfg.perturb.quadratic;
  const CostFn f = [k0, k2](const Vec& x, const Vec&) { return k0 + k2 * x.squaredNorm(); };
  if (ctx.cfg.perturb.mode == "blend")
    return build_h(ctx.model, f, ctx.cfg.perturb.C3, ctx.cfg.perturb.collar, ctx.grid);
  return family_from_h(ctx.model, f, ctx.cfg.perturb.C3, ctx.grid);
}

// Optimal policy, or the only policy when there is a single control.
MarkovPolicy working_policy(const Context& ctx, HjbSolution* sol_out = nullptr) {
  if (ctx.model.controls.size() == 1 && !sol_out)
    return MarkovPolicy::constant(static_cast<std::size_t>(ctx.grid.size()), 0);
  HjbSolution sol = solve_hjb(ctx.model, ctx.grid, ctx.hjb);
  MarkovPolicy p = sol.policy;
  if (sol_out) *sol_out = std::move(sol);
  return p;
}

void cmd_eigen(const Context& ctx, RunReport& rep) {
  const int k = ctx.cfg.solver.eigen_control;
  if (k < 0 || static_cast<std::size_t>(k) >= ctx.model.controls.size())
    throw ValidationError("solver.eigen_control out of range");
  EigenOptions eo;
  eo.tol = ctx.cfg.solver.tol;
  eo.max_iter = ctx.cfg.solver.max_iter * 5;
  eo.scheme = ctx.cfg.solver.scheme;
  const Eigenpair pair =
      policy_value(ctx.model, ctx.grid, MarkovPolicy::constant(static_cast<std::size_t>(ctx.grid.size()), k), eo);
  rep.results["value"] = pair.value;
  rep.results["cw_lower"] = pair.cw_lower;
  rep.results["cw_upper"] = pair.cw_upper;
  rep.results["iterations"] = pair.iterations;
  Table t;
  t.name = "eigenvector";
  t.header = coord_header(ctx.grid.dim());
  t.header.push_back("psi");
  for (Eigen::Index i = 0; i < ctx.grid.size(); ++i) {
    auto row = coords(ctx.grid.coord(i));
    row.push_back(pair.vector[i]);
    t.rows.push_back(std::move(row));
  }
  rep.tables.push_back(std::move(t));
}

void cmd_hjb(const Context& ctx, RunReport& rep) {
  const HjbSolution sol = solve_hjb(ctx.model, ctx.grid, ctx.hjb);
  rep.results["value"] = sol.value;
  rep.results["residual"] = sol.residual;
  rep.results["tol"] = ctx.hjb.tol;
  rep.results["iterations"] = sol.iterations;
  rep.results["history"] = sol.history;
  rep.results["warnings"] = sol.warnings;
  Table t;
  t.name = "hjb_policy";
  t.header = coord_header(ctx.grid.dim());
  t.header.push_back("control");
  const int ud = static_cast<int>(ctx.model.control(0).size());
  for (int k = 0; k < ud; ++k) t.header.push_back("u" + std::to_string(k));
  t.header.push_back("V");
  for (Eigen::Index i = 0; i < ctx.grid.size(); ++i) {
    auto row = coords(ctx.grid.coord(i));
    const int c = sol.policy.control_at(static_cast<std::size_t>(i));
    row.push_back(c);
    const auto u = coords(ctx.model.control(static_cast<std::size_t>(c)));
    row.insert(row.end(), u.begin(), u.end());
    row.push_back(sol.V[i]);
    t.rows.push_back(std::move(row));
  }
  rep.tables.push_back(std::move(t));
}

void cmd_game(const Context& ctx, RunReport& rep) {
  DiffusionModel model = ctx.model;
  if (ctx.cfg.game.epsilon > 0.0) model = with_cost(model, perturbed_cost(make_family(ctx), ctx.cfg.game.epsilon), "eps");
  GameOptions go;
  go.tol = ctx.cfg.solver.tol;
  go.max_iter = ctx.cfg.solver.max_iter;
  go.scheme = ctx.cfg.solver.scheme;
  const double slope = ctx.cfg.sweep.L_slope;
  const double icpt = ctx.cfg.sweep.L_intercept;
  if (!ctx.cfg.sweep.l.empty()) {
    const auto pts = game_value_sweep(model, ctx.grid, ctx.cfg.sweep.l,
                                      [slope, icpt](double l) { return slope * l + icpt; }, go);
    Table t;
    t.name = "game_sweep";
    t.header = {"l", "L_star", "rho", "increment", "residual"};
    for (const auto& p : pts) t.rows.push_back({p.l, p.L_star, p.rho, p.increment, p.residual});
    rep.tables.push_back(std::move(t));
  }
  go.l = ctx.cfg.game.l;
  go.L_star = ctx.cfg.game.L_star;
  const GameSolution sol = solve_ergodic_game(model, ctx.grid, go);
  const IsaacsCheck ic = isaacs_check(model, ctx.grid, sol, go, ctx.cfg.game.isaacs_samples);
  rep.results["epsilon"] = ctx.cfg.game.epsilon;
  rep.results["l"] = go.l;
  rep.results["L_star"] = go.L_star;
  rep.results["rho"] = sol.value;
  rep.results["residual"] = sol.residual;
  rep.results["iterations"] = sol.iterations;
  rep.results["aux_max_norm"] = sol.aux.max_norm();
  rep.results["isaacs"] = {{"min_max", ic.min_max}, {"max_min", ic.max_min}, {"max_gap", ic.max_gap}};
}

void cmd_sweep_eps(const Context& ctx, RunReport& rep) {
  const PerturbationFamily fam = make_family(ctx);
  const EpsilonSweep sw = epsilon_sweep(ctx.model, ctx.grid, fam, ctx.cfg.sweep.epsilon, ctx.hjb);
  rep.results["eps0"] = fam.eps0;
  rep.results["base_value"] = sw.base_value;
  rep.results["slope"] = sw.slope;
  Table t;
  t.name = "epsilon_sweep";
  t.header = {"epsilon", "lambda_sm", "gap"};
  for (const auto& p : sw.points) t.rows.push_back({p.epsilon, p.value, p.gap});
  rep.tables.push_back(std::move(t));
}

void cmd_sweep_kappa(const Context& ctx, RunReport& rep) {
  const KappaSweep sw = kappa_sweep(ctx.model, ctx.grid, ctx.cfg.sweep.kappa, ctx.hjb);
  rep.results["lambda_zero"] = sw.lambda_zero;
  Table t;
  t.name = "kappa_sweep";
  t.header = {"kappa", "lambda_kappa", "lambda_zero_gap"};
  for (const auto& p : sw.points) t.rows.push_back({p.kappa, p.value, p.zero_gap});
  rep.tables.push_back(std::move(t));
}

void cmd_simulate(const Context& ctx, RunReport& rep) {
  const MarkovPolicy policy = working_policy(ctx);
  const Controller ctl = Controller::from_policy(ctx.grid, policy);
  SimulationConfig sc = ctx.cfg.simulation.sim;
  sc.mem_grid = ctx.grid;
  const PathEnsemble ens = simulate(ctx.model, ctl, nullptr, sc);
  const RscEstimate plain = estimate_rsc_cost(ens, ctx.cfg.simulation.truncation);

  EigenOptions eo;
  eo.tol = ctx.cfg.solver.tol;
  eo.scheme = ctx.cfg.solver.scheme;
  eo.max_iter = ctx.cfg.solver.max_iter * 5;
  const Eigenpair pair = policy_value(ctx.model, ctx.grid, policy, eo);
  SimulationConfig isc = ctx.cfg.simulation.sim;
  const RscEstimate is = importance_sampled_cost(ctx.model, ctl, ctx.grid, pair, isc);

  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(ens.digest()));
  rep.results["eigenvalue"] = pair.value;
  rep.results["plain"] = {{"estimate", plain.estimate}, {"std_error", plain.std_error},
                          {"n_used", plain.n_used}, {"excluded", ens.excluded}};
  if (plain.truncated) {
    rep.results["plain"]["truncated"] = *plain.truncated;
    rep.results["plain"]["tail_mass"] = plain.tail_mass;
  }
  rep.results["importance"] = {{"estimate", is.estimate}, {"std_error", is.std_error},
                               {"clipped", is.clipped}};
  rep.results["ensemble_digest"] = digest;

  const MemReport mem = mem_tightness_report(ens, ctx.cfg.simulation.shells);
  rep.results["mem_tight"] = mem.tight;
  Table t;
  t.name = "mem_shells";
  t.header = {"radius", "mass_beyond"};
  for (std::size_t k = 0; k < mem.radii.size(); ++k) t.rows.push_back({mem.radii[k], mem.mass_beyond[k]});
  rep.tables.push_back(std::move(t));
}

void cmd_verify_var(const Context& ctx, RunReport& rep) {
  const auto& vb = ctx.cfg.variational;
  std::mt19937_64 rng(vb.seed);
  std::uniform_int_distribution<int> atoms(1, vb.max_atoms);
  std::uniform_real_distribution<double> fdist(-vb.f_range, vb.f_range);
  std::exponential_distribution<double> ex(1.0);
  double max_gap = 0.0;
  std::size_t inequality_failures = 0;
  for (int s = 0; s < vb.n_spaces; ++s) {
    const auto n = static_cast<std::size_t>(atoms(rng));
    const FiniteNoiseSpace space = FiniteNoiseSpace::random(n, rng());
    std::vector<double> f(n);
    for (auto& v : f) v = fdist(rng);
    const GibbsCheck g = gibbs_identity_check(space, f);
    max_gap = std::max(max_gap, g.gap);
    std::vector<double> q(n);
    double tot = 0.0;
    for (auto& v : q) tot += (v = ex(rng));
    for (auto& v : q) v /= tot;
    if (variational_objective(space, f, q) > g.lhs + 1e-12) ++inequality_failures;
  }
  rep.results["spaces"] = vb.n_spaces;
  rep.results["max_gibbs_gap"] = max_gap;
  rep.results["inequality_failures"] = inequality_failures;
  const bool ok = max_gap <= 1e-12 && inequality_failures == 0;
  rep.results["ok"] = ok;
  rep.check_failed = !ok;
}

void cmd_check_assumptions(const Context& ctx, RunReport& rep) {
  const auto& ab = ctx.cfg.assumptions;
  const double c0 = ab.hbar_constant;
  const double c2 = ab.hbar_quadratic;
  const CostFn hbar = [c0, c2](const Vec& x, const Vec&) { return c0 + c2 * x.squaredNorm(); };
  const int d = ctx.model.dim;
  const int m = ab.sample_counts;
  std::vector<std::pair<Vec, Vec>> samples;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vec x(d);
    for (int k = 0; k < d; ++k)
      x[k] = -ab.sample_radius + 2.0 * ab.sample_radius * idx[static_cast<std::size_t>(k)] / (m - 1);
    for (std::size_t c = 0; c < ctx.model.controls.size(); ++c) samples.emplace_back(x, ctx.model.control(c));
    int k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == m) idx[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) break;
  }
  const AssumptionReport ar =
      check_assumptions(ctx.model, quadratic_lyapunov(ab.Q), hbar, ab.constants, samples);
  rep.results["checked_points"] = ar.checked_points;
  rep.results["violations"] = ar.violations.size();
  rep.results["worst_slack"] = ar.worst_slack;
  rep.results["ok"] = ar.ok();
  rep.check_failed = !ar.ok();
  Table t;
  t.name = "assumption_violations";
  t.header = coord_header(d);
  t.header.push_back("inside_K");
  t.header.push_back("slack");
  for (const auto& v : ar.violations) {
    auto row = coords(v.x);
    row.push_back(v.which == Inequality::inside_K ? 1.0 : 0.0);
    row.push_back(v.slack);
    t.rows.push_back(std::move(row));
  }
  rep.tables.push_back(std::move(t));
}

void cmd_rep_check(const Context& ctx, RunReport& rep) {
  HjbSolution sol;
  const MarkovPolicy policy = working_policy(ctx, &sol);
  const auto& rb = ctx.cfg.rep_check;
  SimulationConfig sc = ctx.cfg.simulation.sim;
  sc.T = rb.T;
  sc.dt = rb.dt;
  sc.n_paths = rb.n_paths;
  sc.antithetic = false;
  const auto pts = check_stochastic_representation(ctx.model, Controller::from_policy(ctx.grid, policy),
                                                   ctx.grid, sol.V, sol.value, rb.R, rb.points, sc,
                                                   rb.sampling == "plain" ? RepSampling::plain : RepSampling::ground);
  rep.results["Lambda"] = sol.value;
  rep.results["R"] = rb.R;
  rep.results["sampling"] = rb.sampling;
  bool conclusive = true;
  Table t;
  t.name = "rep_check";
  t.header = coord_header(ctx.grid.dim());
  t.header.insert(t.header.end(), {"ratio", "std_error", "hit_fraction"});
  for (const auto& p : pts) {
    auto row = coords(p.x);
    row.insert(row.end(), {p.ratio, p.std_error, p.hit_fraction});
    t.rows.push_back(std::move(row));
    conclusive = conclusive && !p.inconclusive;
  }
  rep.results["conclusive"] = conclusive;
  rep.tables.push_back(std::move(t));
}

}  // namespace

RunReport run_command(const std::string& command, const RunConfig& config) {
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
    throw UsageError("unknown command '" + command + "'");
  const auto t0 = std::chrono::steady_clock::now();

  RunReport rep;
  rep.command = command;
  rep.config_digest = config.digest();
  rep.seed = config.simulation.sim.seed;
  rep.workers = config.simulation.sim.workers;

  if (command == "verify-var") {
    Context ctx{config, {}, {}, {}};
    cmd_verify_var(ctx, rep);
  } else {
    Context ctx{config, build_model(config.model), build_grid(config.grid), {}};
    if (ctx.model.dim != ctx.grid.dim())
      throw ValidationError("config: grid dimension does not match the model");
    ctx.hjb.tol = config.solver.tol;
    ctx.hjb.max_iter = config.solver.max_iter;
    ctx.hjb.scheme = config.solver.scheme;
    rep.results["model"] = ctx.model.name;
    rep.results["nodes"] = ctx.grid.size();
    if (command == "eigen") cmd_eigen(ctx, rep);
    else if (command == "hjb") cmd_hjb(ctx, rep);
    else if (command == "game") cmd_game(ctx, rep);
    else if (command == "sweep-eps") cmd_sweep_eps(ctx, rep);
    else if (command == "sweep-kappa") cmd_sweep_kappa(ctx, rep);
    else if (command == "simulate") cmd_simulate(ctx, rep);
    else if (command == "check-assumptions") cmd_check_assumptions(ctx, rep);
    else if (command == "rep-check") cmd_rep_check(ctx, rep);
  }
  rep.wall_times["total_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace ersc

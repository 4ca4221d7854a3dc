#include "ersc/game.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace ersc {

double chi_cutoff(double l, double radius) {
  if (l <= 0.0) return 0.0;
  const double half = 0.5 * l;
  if (radius <= half) return 1.0;
  if (radius >= l) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (radius - half) / half));
}

AuxiliaryPolicy AuxiliaryPolicy::zero(const Grid& grid, double l) {
  AuxiliaryPolicy p;
  p.bound = l;
  p.field.assign(static_cast<std::size_t>(grid.size()), Vec::Zero(grid.dim()));
  p.chi.resize(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    p.chi[static_cast<std::size_t>(i)] = chi_cutoff(l, grid.coord(i).norm());
  return p;
}

double AuxiliaryPolicy::max_norm() const {
  double m = 0.0;
  for (const auto& w : field) m = std::max(m, w.norm());
  return m;
}

InnerMax inner_max_w(const Vec& g, double l) {
  if (l < 0.0) throw ValidationError("inner_max_w: bound must be >= 0");
  InnerMax out;
  const double gn = g.norm();
  if (gn <= l) {
    out.w = g;
    out.payoff = 0.5 * gn * gn;
  } else {
    out.w = g * (l / gn);
    out.payoff = l * gn - 0.5 * l * l;
  }
  return out;
}

std::pair<double, NodeVector> poisson_solve(const SparseRowMatrix& q, const NodeVector& f,
                                            Eigen::Index origin_node) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n || f.size() != n) throw ValidationError("poisson_solve: size mismatch");
  if (origin_node < 0 || origin_node >= n) throw ValidationError("poisson_solve: bad origin");
  // Unknowns (Psi with Psi_o dropped, rho); the column of Psi_o carries -rho.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(q.nonZeros() + n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (SparseRowMatrix::InnerIterator it(q, i); it; ++it)
      if (it.col() != origin_node) trip.emplace_back(i, it.col(), it.value());
    trip.emplace_back(i, origin_node, -1.0);
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw ConvergenceError("poisson_solve: singular system (reducible chain?)");
  NodeVector sol = lu.solve(NodeVector(-f));
  if (!sol.allFinite()) throw ConvergenceError("poisson_solve: non-finite solution");
  const double rho = sol[origin_node];
  sol[origin_node] = 0.0;
  return {rho, sol};
}

namespace {

struct GameSetup {
  const DiffusionModel& model;
  const Grid& grid;
  double L_star;
  DriftScheme scheme;
  std::vector<double> wbound;  // chi_i * l, bound on w~ = chi w
  std::vector<Vec> x;
  std::vector<Mat> sigma;
  std::vector<Mat> a;
  // cost and drift per (node, control)
  std::vector<double> cost;
  std::vector<Vec> drift;
  std::size_t n_controls;

  GameSetup(const DiffusionModel& m, const Grid& g, double l, double Ls, DriftScheme s)
      : model(m), grid(g), L_star(Ls), scheme(s), n_controls(m.controls.size()) {
    const auto n = static_cast<std::size_t>(g.size());
    wbound.resize(n);
    x.resize(n);
    sigma.resize(n);
    a.resize(n);
    cost.resize(n * n_controls);
    drift.resize(n * n_controls);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = g.coord(static_cast<Eigen::Index>(i));
      sigma[i] = m.sigma(x[i]);
      a[i] = sigma[i] * sigma[i].transpose();
      wbound[i] = chi_cutoff(l, x[i].norm()) * l;
      for (std::size_t k = 0; k < n_controls; ++k) {
        cost[i * n_controls + k] = std::min(m.cost(x[i], m.control(k)), L_star);
        drift[i * n_controls + k] = m.drift(x[i], m.control(k));
      }
    }
  }

  std::size_t size() const { return x.size(); }
  double c(std::size_t i, int k) const { return cost[i * n_controls + static_cast<std::size_t>(k)]; }
  const Vec& b(std::size_t i, int k) const { return drift[i * n_controls + static_cast<std::size_t>(k)]; }
};

// Derivative of (Q Psi)_i with respect to the drift under central differencing;
// a missing neighbor is replaced by the node itself, as in the stencil.
Vec drift_gradient(const Grid& grid, Eigen::Index i, const NodeVector& psi) {
  Vec d(grid.dim());
  for (int k = 0; k < grid.dim(); ++k) {
    const Eigen::Index up = grid.shift(i, k, 1);
    const Eigen::Index dn = grid.shift(i, k, -1);
    d[k] = (psi[up >= 0 ? up : i] - psi[dn >= 0 ? dn : i]) / (2.0 * grid.spacing(k));
  }
  return d;
}

Vec optimal_wtilde(const GameSetup& s, std::size_t i, const NodeVector& psi) {
  const Vec g = s.sigma[i].transpose() * drift_gradient(s.grid, static_cast<Eigen::Index>(i), psi);
  return inner_max_w(g, s.wbound[i]).w;
}

double mixed_hamiltonian(const GameSetup& s, std::size_t i, const MarkovPolicy::Mixture& mix, const Vec& wt,
                         const NodeVector& psi, std::vector<StencilEntry>& st) {
  double h = -0.5 * wt.squaredNorm();
  for (const auto& [k, weight] : mix) {
    node_stencil(s.grid, static_cast<Eigen::Index>(i), s.b(i, k) + s.sigma[i] * wt, s.a[i], s.scheme, st);
    h += weight * (apply_stencil(st, static_cast<Eigen::Index>(i), psi) + s.c(i, k));
  }
  return h;
}

// Maximizer of the discrete Hamiltonian over a candidate set. Under central
// differencing the closed form is exact; where the stencil falls back to upwind
// the Hamiltonian is only piecewise concave in w, so the closed forms built from
// one-sided gradients are tried as well. `current` is kept unless beaten by a
// relative margin, which keeps policy iteration monotone.
std::pair<Vec, double> best_wtilde(const GameSetup& s, std::size_t i, const MarkovPolicy::Mixture& mix,
                                   const NodeVector& psi, const Vec* current,
                                   std::vector<StencilEntry>& st) {
  const auto node = static_cast<Eigen::Index>(i);
  const int d = s.grid.dim();
  Vec best_w = current ? *current : Vec::Zero(d);
  double best = mixed_hamiltonian(s, i, mix, best_w, psi, st);
  const double margin = 1e-13 * (1.0 + std::abs(best));
  auto consider = [&](const Vec& w) {
    const double h = mixed_hamiltonian(s, i, mix, w, psi, st);
    if (h > best + margin) {
      best = h;
      best_w = w;
    }
  };
  consider(Vec::Zero(d));
  consider(optimal_wtilde(s, i, psi));
  // Per-axis choice among backward, central and forward differences.
  std::vector<std::array<double, 3>> slopes(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const Eigen::Index up = s.grid.shift(node, k, 1);
    const Eigen::Index dn = s.grid.shift(node, k, -1);
    const double h = s.grid.spacing(k);
    const double fwd = (psi[up >= 0 ? up : node] - psi[node]) / h;
    const double bwd = (psi[node] - psi[dn >= 0 ? dn : node]) / h;
    slopes[static_cast<std::size_t>(k)] = {bwd, 0.5 * (fwd + bwd), fwd};
  }
  int combos = 1;
  for (int k = 0; k < d; ++k) combos *= 3;
  Vec g(d);
  for (int c = 0; c < combos; ++c) {
    int rest = c;
    for (int k = 0; k < d; ++k, rest /= 3) g[k] = slopes[static_cast<std::size_t>(k)][static_cast<std::size_t>(rest % 3)];
    consider(inner_max_w(s.sigma[i].transpose() * g, s.wbound[i]).w);
  }
  return {best_w, best};
}

double hamiltonian(const GameSetup& s, std::size_t i, int k, const Vec& wt, const NodeVector& psi,
                   std::vector<StencilEntry>& st) {
  const Vec drift = s.b(i, k) + s.sigma[i] * wt;
  node_stencil(s.grid, static_cast<Eigen::Index>(i), drift, s.a[i], s.scheme, st);
  return apply_stencil(st, static_cast<Eigen::Index>(i), psi) + s.c(i, k) - 0.5 * wt.squaredNorm();
}

std::pair<SparseRowMatrix, NodeVector> build_system(const GameSetup& s, const MarkovPolicy& v,
                                                    const std::vector<Vec>& wt) {
  const auto n = s.size();
  std::vector<Eigen::Triplet<double>> trip;
  NodeVector f(static_cast<Eigen::Index>(n));
  std::vector<StencilEntry> st;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double fi = -0.5 * wt[i].squaredNorm();
    double diag = 0.0;
    for (const auto& [k, weight] : v.assignment[i]) {
      node_stencil(s.grid, row, s.b(i, k) + s.sigma[i] * wt[i], s.a[i], s.scheme, st);
      for (const auto& e : st) {
        trip.emplace_back(row, e.col, weight * e.rate);
        diag -= weight * e.rate;
      }
      fi += weight * s.c(i, k);
    }
    trip.emplace_back(row, row, diag);
    f[row] = fi;
  }
  SparseRowMatrix q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  q.setFromTriplets(trip.begin(), trip.end());
  return {std::move(q), std::move(f)};
}

struct InnerResult {
  double rho = 0.0;
  NodeVector psi;
  std::vector<Vec> wt;
  double residual = 0.0;
  int iterations = 0;
};

// sup over w for the frozen policy v, by policy iteration on w~.
InnerResult maximize_w(const GameSetup& s, const MarkovPolicy& v, std::vector<Vec> wt, double tol,
                       int max_iter) {
  InnerResult out;
  std::vector<StencilEntry> st;
  for (int it = 0; it < max_iter; ++it) {
    auto [q, f] = build_system(s, v, wt);
    auto [rho, psi] = poisson_solve(q, f, s.grid.origin_node());
    double residual = 0.0;
    std::vector<Vec> next(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto [w, h] = best_wtilde(s, i, v.assignment[i], psi, &wt[i], st);
      next[i] = w;
      residual = std::max(residual, std::abs(h - rho));
    }
    out.rho = rho;
    out.psi = std::move(psi);
    out.residual = residual;
    out.iterations = it + 1;
    if (residual < tol) {
      out.wt = std::move(wt);
      return out;
    }
    wt = std::move(next);
  }
  std::ostringstream msg;
  msg << "sup_w: no convergence in " << max_iter << " iterations (residual " << out.residual << ")";
  throw ConvergenceError(msg.str());
}

MarkovPolicy cheapest_policy(const GameSetup& s) {
  std::vector<int> init(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    int best = 0;
    for (std::size_t k = 1; k < s.n_controls; ++k)
      if (s.c(i, static_cast<int>(k)) < s.c(i, best) - 1e-12 * (1.0 + std::abs(s.c(i, best))))
        best = static_cast<int>(k);
    init[i] = best;
  }
  return MarkovPolicy::precise(init, "greedy-cost");
}

AuxiliaryPolicy to_aux(const GameSetup& s, double l, const std::vector<Vec>& wt) {
  AuxiliaryPolicy aux = AuxiliaryPolicy::zero(s.grid, l);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (aux.chi[i] > 0.0) aux.field[i] = wt[i] / aux.chi[i];
  return aux;
}

GameSolution solve_game_impl(const DiffusionModel& model, const Grid& grid, double l,
                             double L_star, double tol, int max_iter, DriftScheme scheme,
                             const std::optional<MarkovPolicy>& initial, bool improve_policy) {
  if (model.dim != grid.dim()) throw ValidationError("game: dimension mismatch");
  model.controls.validate();
  const GameSetup s(model, grid, l, L_star, scheme);

  MarkovPolicy v = initial ? *initial : cheapest_policy(s);
  v.validate(s.size(), s.n_controls);
  std::vector<Vec> wt(s.size(), Vec::Zero(grid.dim()));

  GameSolution sol;
  std::vector<StencilEntry> st;
  for (int it = 0; it < max_iter; ++it) {
    InnerResult inner = maximize_w(s, v, std::move(wt), tol, max_iter);
    wt = inner.wt;
    sol.history.push_back(inner.rho);
    sol.iterations = it + 1;

    std::vector<int> improved(s.size());
    double residual = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<double> values(s.n_controls);
      for (std::size_t k = 0; k < s.n_controls; ++k)
        values[k] = best_wtilde(s, i, {{static_cast<int>(k), 1.0}}, inner.psi, &wt[i], st).second;
      const double best = *std::min_element(values.begin(), values.end());
      const double tie = 1e-12 * (1.0 + std::abs(best));
      int pick = -1;
      if (v.is_precise() || v.assignment[i].size() == 1) {
        const int cur = v.assignment[i].front().first;
        if (values[static_cast<std::size_t>(cur)] <= best + tie) pick = cur;
      }
      if (pick < 0)
        for (std::size_t k = 0; k < s.n_controls && pick < 0; ++k)
          if (values[k] <= best + tie) pick = static_cast<int>(k);
      improved[i] = pick;
      residual = std::max(residual, std::abs(best - inner.rho));
    }
    MarkovPolicy next = MarkovPolicy::precise(improved, "game");

    const bool stable = !improve_policy || next == v;
    const bool stalled = sol.history.size() >= 2 &&
                         sol.history[sol.history.size() - 2] - inner.rho < tol && residual < tol;
    if (stable || stalled) {
      sol.value = inner.rho;
      sol.bias = std::move(inner.psi);
      sol.policy = improve_policy ? std::move(next) : v;
      sol.aux = to_aux(s, l, wt);
      sol.residual = improve_policy ? residual : inner.residual;
      return sol;
    }
    v = std::move(next);
  }
  std::ostringstream msg;
  msg << "game: policy iteration did not converge in " << max_iter << " iterations";
  throw ConvergenceError(msg.str());
}

void check_game_options(const GameOptions& o) {
  if (!(o.l > 0.0)) throw ValidationError("game: l must be > 0");
  if (!(o.L_star > 0.0)) throw ValidationError("game: L* must be > 0");
  if (!(o.tol > 0.0)) throw ValidationError("game: tol must be > 0");
  if (o.max_iter < 1) throw ValidationError("game: max_iter must be >= 1");
}

}  // namespace

GameSolution solve_ergodic_game(const DiffusionModel& model, const Grid& grid,
                                const GameOptions& options) {
  check_game_options(options);
  return solve_game_impl(model, grid, options.l, options.L_star, options.tol, options.max_iter,
                         options.scheme, options.initial_policy, true);
}

GameSolution sup_w_fixed_policy(const DiffusionModel& model, const Grid& grid,
                                const MarkovPolicy& policy, const GameOptions& options) {
  check_game_options(options);
  return solve_game_impl(model, grid, options.l, options.L_star, options.tol, options.max_iter,
                         options.scheme, policy, false);
}

std::vector<GameSweepPoint> game_value_sweep(const DiffusionModel& model, const Grid& grid,
                                             const std::vector<double>& l_list,
                                             const LRule& L_rule, GameOptions options) {
  std::vector<GameSweepPoint> out;
  for (const double l : l_list) {
    options.l = l;
    options.L_star = L_rule(l);
    const GameSolution sol = solve_ergodic_game(model, grid, options);
    options.initial_policy = sol.policy;
    GameSweepPoint p;
    p.l = l;
    p.L_star = options.L_star;
    p.rho = sol.value;
    p.increment = out.empty() ? 0.0 : sol.value - out.back().rho;
    p.residual = sol.residual;
    out.push_back(p);
  }
  return out;
}

AverageCostSolution solve_average_cost(const DiffusionModel& model, const Grid& grid, double tol,
                                       int max_iter, DriftScheme scheme) {
  if (!(tol > 0.0) || max_iter < 1) throw ValidationError("solve_average_cost: bad tolerances");
  const GameSolution g = solve_game_impl(model, grid, 0.0,
                                         std::numeric_limits<double>::infinity(), tol, max_iter,
                                         scheme, std::nullopt, true);
  AverageCostSolution out;
  out.value = g.value;
  out.bias = g.bias;
  out.policy = g.policy;
  out.residual = g.residual;
  out.iterations = g.iterations;
  return out;
}

IsaacsCheck isaacs_check(const DiffusionModel& model, const Grid& grid, const GameSolution& sol,
                         const GameOptions& options, int samples) {
  check_game_options(options);
  if (samples < 0) throw ValidationError("isaacs_check: samples must be >= 0");
  const GameSetup s(model, grid, options.l, options.L_star, options.scheme);
  std::mt19937_64 rng(0x15aac5ULL);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  std::vector<StencilEntry> st;

  IsaacsCheck out;
  const int d = grid.dim();
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto min_over_u = [&](const Vec& wt) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.n_controls; ++k)
        best = std::min(best, hamiltonian(s, i, static_cast<int>(k), wt, sol.bias, st));
      return best;
    };
    const Vec incumbent = i < sol.aux.field.size() ? Vec(sol.aux.chi[i] * sol.aux.field[i]) : Vec(Vec::Zero(d));
    double min_max = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.n_controls; ++k)
      min_max = std::min(min_max, best_wtilde(s, i, {{static_cast<int>(k), 1.0}}, sol.bias, &incumbent, st).second);
    // Under central differencing the closed-form w is a common maximizer for
    // every u and the two values coincide.
    double max_min = std::max(min_over_u(optimal_wtilde(s, i, sol.bias)), min_over_u(incumbent));
    for (int j = 0; j < samples; ++j) {
      Vec z(d);
      for (int k = 0; k < d; ++k) z[k] = gauss(rng);
      const double zn = z.norm();
      if (zn == 0.0) continue;
      const double radius = s.wbound[i] * std::pow(unif(rng), 1.0 / d);
      max_min = std::max(max_min, min_over_u(z * (radius / zn)));
    }
    out.min_max = std::max(out.min_max, std::abs(min_max - sol.value));
    out.max_min = std::max(out.max_min, std::abs(max_min - sol.value));
    out.max_gap = std::max(out.max_gap, min_max - max_min);
  }
  return out;
}

}  // namespace ersc

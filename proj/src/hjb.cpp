#include "ersc/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ersc {

std::vector<double> hjb_row_values(const DiffusionModel& model, const Grid& grid,
                                   Eigen::Index node, const NodeVector& V, DriftScheme scheme) {
  const Vec x = grid.coord(node);
  const Mat a = model.diffusion(x);
  std::vector<StencilEntry> st;
  std::vector<double> out(model.controls.size());
  for (std::size_t k = 0; k < model.controls.size(); ++k) {
    const Vec& u = model.control(k);
    node_stencil(grid, node, model.drift(x, u), a, scheme, st);
    out[k] = apply_stencil(st, node, V) / V[node] + model.cost(x, u);
  }
  return out;
}

namespace {

// Lowest index whose value is within the tie tolerance of the minimum.
std::pair<int, double> tie_broken_argmin(const std::vector<double>& values) {
  const double best = *std::min_element(values.begin(), values.end());
  const double tie = 1e-12 * (1.0 + std::abs(best));
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] <= best + tie) return {static_cast<int>(k), best};
  return {0, best};
}

}  // namespace

HjbSolution solve_hjb(const DiffusionModel& model, const Grid& grid, const HjbOptions& options) {
  if (model.dim != grid.dim()) throw ValidationError("solve_hjb: dimension mismatch");
  model.controls.validate();
  const Eigen::Index n = grid.size();
  const auto n_nodes = static_cast<std::size_t>(n);

  MarkovPolicy policy;
  if (options.initial_policy) {
    policy = *options.initial_policy;
    policy.validate(n_nodes, model.controls.size());
  } else {
    // Greedy against V = 1, i.e. the cheapest control per node.
    std::vector<int> init(n_nodes);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec x = grid.coord(i);
      std::vector<double> c(model.controls.size());
      for (std::size_t k = 0; k < c.size(); ++k) c[k] = model.cost(x, model.control(k));
      init[static_cast<std::size_t>(i)] = tie_broken_argmin(c).first;
    }
    policy = MarkovPolicy::precise(init, "greedy-cost");
  }

  EigenOptions eo;
  eo.tol = options.eig_tol.value_or(options.tol * 1e-2);
  eo.scheme = options.scheme;

  HjbSolution sol;
  std::vector<MarkovPolicy> seen;
  for (int it = 0; it < options.max_iter; ++it) {
    const Eigenpair pair = policy_value(model, grid, policy, eo);
    eo.initial = pair.vector;
    sol.history.push_back(pair.value);
    sol.iterations = it + 1;

    std::vector<int> improved(n_nodes);
    double residual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [k, best] = tie_broken_argmin(hjb_row_values(model, grid, i, pair.vector, options.scheme));
      improved[static_cast<std::size_t>(i)] = k;
      residual = std::max(residual, std::abs(best - pair.value));
    }
    MarkovPolicy next = MarkovPolicy::precise(improved, "hjb");

    const bool stable = next == policy;
    const bool stalled = sol.history.size() >= 2 &&
                         sol.history[sol.history.size() - 2] - pair.value < options.tol &&
                         residual < options.tol;
    const bool cycling =
        !stable && std::find(seen.begin(), seen.end(), next) != seen.end() &&
        sol.history.size() >= 2 &&
        std::abs(sol.history[sol.history.size() - 2] - pair.value) <= options.tol;
    if (stable || stalled || cycling) {
      if (cycling) sol.warnings.push_back("policy cycle among tied controls; accepted");
      sol.value = pair.value;
      sol.V = pair.vector;
      sol.policy = std::move(next);
      sol.residual = residual;
      if (residual > options.tol) {
        std::ostringstream msg;
        msg << "HJB residual " << residual << " above tolerance " << options.tol;
        sol.warnings.push_back(msg.str());
      }
      return sol;
    }
    seen.push_back(policy);
    policy = std::move(next);
  }
  std::ostringstream msg;
  msg << "solve_hjb: policy iteration did not converge in " << options.max_iter << " iterations";
  throw ConvergenceError(msg.str());
}

OptimalityReport check_optimality_condition(const DiffusionModel& model, const Grid& grid,
                                            const HjbSolution& solution,
                                            const MarkovPolicy& candidate, double tol,
                                            DriftScheme scheme) {
  candidate.validate(static_cast<std::size_t>(grid.size()), model.controls.size());
  OptimalityReport rep;
  rep.gap.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto values = hjb_row_values(model, grid, i, solution.V, scheme);
    const double best = *std::min_element(values.begin(), values.end());
    double cand = 0.0;
    for (const auto& [c, w] : candidate.assignment[static_cast<std::size_t>(i)])
      cand += w * values[static_cast<std::size_t>(c)];
    rep.gap[i] = cand - best;
    if (rep.gap[i] > rep.max_gap) {
      rep.max_gap = rep.gap[i];
      rep.worst_node = i;
    }
  }
  rep.is_minimizer = rep.max_gap <= tol;
  return rep;
}

std::vector<Vec> grid_gradient(const Grid& grid, const NodeVector& f) {
  std::vector<Vec> out(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    Vec g(grid.dim());
    for (int k = 0; k < grid.dim(); ++k) {
      const Eigen::Index up = grid.shift(i, k, 1);
      const Eigen::Index dn = grid.shift(i, k, -1);
      const double h = grid.spacing(k);
      if (up >= 0 && dn >= 0) {
        g[k] = (f[up] - f[dn]) / (2.0 * h);
      } else if (up >= 0) {
        g[k] = (f[up] - f[i]) / h;
      } else {
        g[k] = (f[i] - f[dn]) / h;
      }
    }
    out[static_cast<std::size_t>(i)] = g;
  }
  return out;
}

std::vector<Vec> value_gradient_field(const DiffusionModel& model, const Grid& grid,
                                      const NodeVector& V) {
  if (!(V.array() > 0.0).all()) throw ValidationError("value_gradient_field: V must be positive");
  const NodeVector logv = V.array().log().matrix();
  auto grad = grid_gradient(grid, logv);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    auto& g = grad[static_cast<std::size_t>(i)];
    g = model.sigma(grid.coord(i)).transpose() * g;
  }
  return grad;
}

}  // namespace ersc

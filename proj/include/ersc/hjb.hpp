#pragma once

#include "ersc/discretize.hpp"
#include "ersc/eigensolve.hpp"
#include "ersc/model.hpp"
#include "ersc/policy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ersc {

/// Solution (Lambda, V, v*) of min_u [L^u V + r V] = Lambda V on the grid.
struct HjbSolution {
  double value = 0.0;
  NodeVector V;  // positive, V[origin] == 1
  MarkovPolicy policy;
  // max_i |min_u [(Q^u V)_i + r(x_i,u) V_i] / V_i - Lambda|
  double residual = 0.0;
  std::vector<double> history;  // Perron value of each evaluated policy
  int iterations = 0;
  std::vector<std::string> warnings;

  NodeVector log_V() const { return V.array().log().matrix(); }
};

struct HjbOptions {
  double tol = 1e-9;
  int max_iter = 200;
  // Inner eigen-solve tolerance; defaults to tol / 100.
  std::optional<double> eig_tol;
  DriftScheme scheme = DriftScheme::hybrid;
  std::optional<MarkovPolicy> initial_policy;
};

/// Howard-style policy iteration on the Perron value. Each improvement picks
/// argmin_u [(Q^u V)_i + r(x_i,u) V_i], ties going to the lowest control index,
/// so the evaluated values never increase.
HjbSolution solve_hjb(const DiffusionModel& model, const Grid& grid, const HjbOptions& options = {});

/// Normalized row values (Q^u V)_i / V_i + r(x_i, u) for every control at node i.
std::vector<double> hjb_row_values(const DiffusionModel& model, const Grid& grid,
                                   Eigen::Index node, const NodeVector& V,
                                   DriftScheme scheme = DriftScheme::hybrid);

struct OptimalityReport {
  NodeVector gap;  // candidate row value minus the rowwise minimum (>= 0)
  double max_gap = 0.0;
  Eigen::Index worst_node = 0;
  bool is_minimizer = false;
};

/// Compares a candidate policy's row values against the rowwise minimum at the
/// solution's V.
OptimalityReport check_optimality_condition(const DiffusionModel& model, const Grid& grid,
                                            const HjbSolution& solution,
                                            const MarkovPolicy& candidate, double tol,
                                            DriftScheme scheme = DriftScheme::hybrid);

/// omega = Sigma^T grad(log V): central differences inside, one-sided on the boundary.
std::vector<Vec> value_gradient_field(const DiffusionModel& model, const Grid& grid,
                                      const NodeVector& V);

/// Per-node gradient of a grid function (same differencing as above).
std::vector<Vec> grid_gradient(const Grid& grid, const NodeVector& f);

}  // namespace ersc

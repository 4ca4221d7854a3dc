#pragma once

#include "ersc/discretize.hpp"
#include "ersc/model.hpp"
#include "ersc/policy.hpp"
#include "ersc/types.hpp"

#include <iosfwd>
#include <optional>

namespace ersc {

/// Perron pair of Q + diag(r): simple real eigenvalue with positive eigenvector.
struct Eigenpair {
  double value = 0.0;
  NodeVector vector;  // strictly positive, vector[origin_node] == 1
  Eigen::Index origin_node = 0;
  double cw_lower = 0.0;
  double cw_upper = 0.0;
  int iterations = 0;
};

struct EigenOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  std::optional<NodeVector> initial;  // warm start, must be positive
  DriftScheme scheme = DriftScheme::hybrid;
};

/// Shifted inverse power iteration. The shift always sits above the current
/// Collatz-Wielandt upper bound, so sI - A stays a nonsingular M-matrix and every
/// iterate stays positive; the bracket [min_i (A psi)_i/psi_i, max_i ...] then
/// contracts monotonically. Returns the upper end of the final bracket.
Eigenpair principal_eigenpair(const SparseRowMatrix& q, const NodeVector& r,
                              Eigen::Index origin_node = 0, const EigenOptions& options = {});

inline Eigenpair principal_eigenpair(const GeneratorMatrix& q, const NodeVector& r,
                                     Eigen::Index origin_node = 0,
                                     const EigenOptions& options = {}) {
  return principal_eigenpair(q.rates, r, origin_node, options);
}

/// Collatz-Wielandt bounds of A = Q + diag(r) at a positive vector.
std::pair<double, double> collatz_wielandt(const SparseRowMatrix& q, const NodeVector& r,
                                           const NodeVector& psi);

/// Risk-sensitive value of a stationary Markov policy on the grid.
Eigenpair policy_value(const DiffusionModel& model, const Grid& grid, const MarkovPolicy& policy,
                       const EigenOptions& options = {});

struct LyapunovCertificate {
  Eigenpair pair;
  // min over nodes outside the core ball of scale*h - lambda
  double drift_margin = 0.0;
  double core_radius = 0.0;
};

/// Eigenpair of Q^v + scale diag(h^v); its eigenvector is a discrete
/// Foster-Lyapunov function since L^v W = -(scale h^v - lambda) W.
LyapunovCertificate foster_lyapunov_certificate(const DiffusionModel& model, const Grid& grid,
                                                const MarkovPolicy& policy, const CostFn& h,
                                                double scale, double core_radius,
                                                const EigenOptions& options = {});

/// CSV with node coordinates x0..x{d-1} and psi.
void write_eigenvector_csv(std::ostream& os, const Grid& grid, const NodeVector& psi);

}  // namespace ersc

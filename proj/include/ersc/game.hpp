#pragma once

#include "ersc/discretize.hpp"
#include "ersc/model.hpp"
#include "ersc/policy.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ersc {

/// Radial cutoff: 1 on the ball of radius l/2, cosine taper to 0 at radius l.
double chi_cutoff(double l, double radius);

/// Auxiliary (maximizer) drift field on the grid, confined to the radius-l ball.
struct AuxiliaryPolicy {
  std::vector<Vec> field;
  std::vector<double> chi;  // chi_l at each node
  double bound = 0.0;       // l

  static AuxiliaryPolicy zero(const Grid& grid, double l);
  /// max_i ||field_i||
  double max_norm() const;
};

struct InnerMax {
  Vec w;
  double payoff = 0.0;
};

/// argmax over ||w|| <= l of g.w - |w|^2/2, in closed form.
InnerMax inner_max_w(const Vec& g, double l);

struct GameOptions {
  double l = 8.0;
  double L_star = 26.0;
  double tol = 1e-9;
  int max_iter = 200;
  DriftScheme scheme = DriftScheme::hybrid;
  std::optional<MarkovPolicy> initial_policy;
};

/// Solution of the truncated ergodic game
///   min_u max_{|w|<=l} [L^u Psi + (r ^ L*) - |chi w|^2/2 + chi Sigma w . grad Psi] = rho.
/// The model's running cost is used as given; pass the perturbed cost through
/// with_cost() to solve the epsilon-game.
struct GameSolution {
  double value = 0.0;  // rho
  NodeVector bias;     // Psi, Psi[origin] == 0
  MarkovPolicy policy;
  AuxiliaryPolicy aux;
  double residual = 0.0;  // max_i |min_u max_w H_i - rho|
  std::vector<double> history;
  int iterations = 0;
};

/// Saddle point by policy iteration: for the current minimizer policy the
/// maximizer is solved to optimality (inner Poisson solves with closed-form w
/// updates), then the minimizer improves pointwise.
GameSolution solve_ergodic_game(const DiffusionModel& model, const Grid& grid,
                                const GameOptions& options);

/// Inner problem only: sup over w for a frozen policy.
GameSolution sup_w_fixed_policy(const DiffusionModel& model, const Grid& grid,
                                const MarkovPolicy& policy, const GameOptions& options);

struct GameSweepPoint {
  double l = 0.0;
  double L_star = 0.0;
  double rho = 0.0;
  double increment = 0.0;  // rho_l - rho_{previous l}
  double residual = 0.0;
};

using LRule = std::function<double(double l)>;

/// Default truncation pairing L*(l) = 2 l + 10.
inline double default_L_rule(double l) { return 2.0 * l + 10.0; }

std::vector<GameSweepPoint> game_value_sweep(const DiffusionModel& model, const Grid& grid,
                                             const std::vector<double>& l_list,
                                             const LRule& L_rule = default_L_rule,
                                             GameOptions options = {});

/// Conventional ergodic (average-cost) control: the game with w frozen at 0 and
/// no cost truncation.
struct AverageCostSolution {
  double value = 0.0;
  NodeVector bias;
  MarkovPolicy policy;
  double residual = 0.0;
  int iterations = 0;
};

AverageCostSolution solve_average_cost(const DiffusionModel& model, const Grid& grid,
                                       double tol = 1e-10, int max_iter = 200,
                                       DriftScheme scheme = DriftScheme::hybrid);

/// Average cost of a fixed policy: (rho, Psi) with Q^v Psi + r^v = rho, Psi[origin] = 0.
std::pair<double, NodeVector> poisson_solve(const SparseRowMatrix& q, const NodeVector& f,
                                            Eigen::Index origin_node);

struct IsaacsCheck {
  double min_max = 0.0;  // max over nodes of |min_u max_w H - rho|
  double max_min = 0.0;  // max over nodes of |max_w min_u H - rho|
  double max_gap = 0.0;  // max over nodes of min_max_i - max_min_i
};

/// Evaluates both orders of optimization at the converged bias. The max_w min_u
/// side searches `samples` points of each node's ball plus the closed-form w.
IsaacsCheck isaacs_check(const DiffusionModel& model, const Grid& grid, const GameSolution& sol,
                         const GameOptions& options, int samples = 64);

}  // namespace ersc

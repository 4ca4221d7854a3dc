#pragma once

#include "ersc/discretize.hpp"
#include "ersc/eigensolve.hpp"
#include "ersc/game.hpp"
#include "ersc/model.hpp"
#include "ersc/policy.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ersc {

/// Box-Muller pair keyed by (seed, path, pair index); independent of the order
/// in which paths are run.
std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t path,
                                              std::uint64_t pair);

/// Normal number `index` of a path; the simulator uses index = step * dim + component.
inline double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t index) {
  const auto p = counter_normal_pair(seed, path, index / 2);
  return index % 2 == 0 ? p.first : p.second;
}

/// Feedback law: the control mixture applied at state x. The returned reference
/// stays valid while the controller is alive.
struct Controller {
  std::function<const MarkovPolicy::Mixture&(const Vec&)> mixture;

  static Controller constant(int control);
  /// Nearest-node lookup of a grid policy (states outside the box use the
  /// nearest boundary node).
  static Controller from_policy(const Grid& grid, const MarkovPolicy& policy);
};

/// State-dependent auxiliary drift w(x); the simulated drift gains Sigma(x) w(x).
using AuxField = std::function<Vec(const Vec&)>;

AuxField constant_aux(const Vec& c);
/// Nearest-node lookup of an auxiliary policy's field.
AuxField aux_from_policy(const Grid& grid, const AuxiliaryPolicy& aux);
/// Multilinear interpolation of per-node vectors (clamped to the box).
AuxField interpolate_field(const Grid& grid, const std::vector<Vec>& field);

/// Multilinear interpolation of a grid function; states outside the box are
/// clamped onto it and `clipped` is set.
double interpolate(const Grid& grid, const NodeVector& f, const Vec& x, bool* clipped = nullptr);

struct SimulationConfig {
  double dt = 1e-3;
  double T = 1.0;
  int n_paths = 1000;
  std::uint64_t seed = 1;
  Vec x0 = Vec::Zero(1);
  bool antithetic = false;
  int workers = 1;
  // Stop each path on entering the closed ball of this radius.
  std::optional<double> hit_radius;
  bool stop_at_hit = false;
  // Occupation histogram over the nodes of this grid (plus an outside bin).
  std::optional<Grid> mem_grid;
  // Accumulate the discrete Girsanov log-likelihood of the aux drift.
  bool likelihood_ratio = false;

  void validate(int dim) const;
  std::int64_t steps() const;
};

struct PathEnsemble {
  double T = 0.0;
  double dt = 0.0;
  std::vector<Vec> terminal;
  std::vector<double> cost_integral;     // int r dt (up to the stopping time if any)
  std::vector<double> penalty_integral;  // int |w|^2 / 2 dt
  std::vector<double> log_likelihood;    // log dP/dQ when requested, else 0
  std::vector<double> hit_time;          // NaN when the target was not reached
  std::vector<char> valid;               // false for paths that blew up
  std::size_t excluded = 0;
  std::optional<Grid> mem_grid;
  std::vector<double> mem;  // node masses, last entry is the outside bin; sums to 1

  std::size_t size() const { return terminal.size(); }
  /// FNV-1a over the bit patterns of all per-path records.
  std::uint64_t digest() const;
};

/// Euler-Maruyama for dZ = [b(Z,u) + Sigma(Z) w(Z)] dt + Sigma(Z) dW with the
/// control mixture from `controller`.
PathEnsemble simulate(const DiffusionModel& model, const Controller& controller,
                      const AuxField* aux, const SimulationConfig& cfg);

struct RscEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_used = 0;
  // Truncated estimate over paths with int r <= L T, and the share of the
  // exponential mass carried by the excluded paths.
  std::optional<double> truncated;
  double tail_mass = 0.0;
  std::size_t clipped = 0;  // paths whose terminal state left the grid box
};

/// (1/T) log mean exp(int r dt + log-likelihood) by log-sum-exp, delta-method stderr.
RscEstimate estimate_rsc_cost(const PathEnsemble& ensemble,
                              std::optional<double> truncation = std::nullopt);

struct ImportanceOptions {
  // Multiply each path by psi(Z_T)/psi(x0) exp(-lambda T); the martingale makes the
  // per-path weight nearly constant and the estimator targets lambda. Without it
  // the estimator targets the finite-horizon cost.
  bool terminal_correction = true;
};

/// Ground-diffusion importance sampling: simulate with w = Sigma^T grad log psi and
/// reweight by the discrete Girsanov likelihood.
RscEstimate importance_sampled_cost(const DiffusionModel& model, const Controller& controller,
                                    const Grid& grid, const Eigenpair& pair,
                                    const SimulationConfig& cfg, ImportanceOptions options = {});

struct RepresentationPoint {
  Vec x;
  double ratio = 0.0;
  double std_error = 0.0;
  double hit_fraction = 0.0;
  bool inconclusive = false;
};

/// How rep-check paths are drawn. Under `plain` the weight exp(int (r - Lambda))
/// can have infinite variance (OU with q > a^2 / 2 sigma^2); `ground` samples the
/// drift-tilted diffusion with omega = grad log V and reweights by dP/dQ.
enum class RepSampling { plain, ground };

/// E[exp(int_0^tau (r - Lambda) dt) V(X_tau)] / V(x), tau the entry time of the
/// closed radius-R ball, estimated at each test point.
std::vector<RepresentationPoint> check_stochastic_representation(
    const DiffusionModel& model, const Controller& controller, const Grid& grid,
    const NodeVector& V, double Lambda, double R, const std::vector<Vec>& test_points,
    SimulationConfig cfg, RepSampling sampling = RepSampling::ground);

struct MemReport {
  std::vector<double> radii;
  std::vector<double> mass_beyond;  // occupation mass with |x| > radius
  // radii.size() + 1 shells: [0, r_0), [r_0, r_1), ..., [r_last, inf)
  std::vector<double> shell_mass;
  // Shell masses do not increase from the modal shell outward.
  bool tight = false;
};

MemReport mem_tightness_report(const PathEnsemble& ensemble, const std::vector<double>& shell_radii);

/// Runs body(i) for i in [0, n) on `workers` threads in contiguous blocks.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace ersc

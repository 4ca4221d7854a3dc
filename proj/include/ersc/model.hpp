#pragma once

#include "ersc/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ersc {

using DriftFn = std::function<Vec(const Vec& x, const Vec& u)>;
using SigmaFn = std::function<Mat(const Vec& x)>;
using CostFn = std::function<double(const Vec& x, const Vec& u)>;
using StateFn = std::function<double(const Vec& x)>;

/// Finite ordered list of control points discretizing the compact control space.
struct ControlSet {
  std::vector<Vec> points;
  std::string description;

  std::size_t size() const { return points.size(); }
  /// Throws ValidationError if empty, ragged or containing duplicates.
  void validate() const;
};

/// Open set described by a margin function: the set is {margin > 0}.
///
/// The blend is 1 on the closure of the set and falls linearly to 0 across a
/// collar of the given width outside it.
struct RegionSpec {
  StateFn margin;
  std::string description;

  bool contains(const Vec& x) const { return margin(x) > 0.0; }
  double blend(const Vec& x, double collar_width) const;

  static RegionSpec everywhere();
  static RegionSpec empty();
  static RegionSpec ball(double radius);
  /// {x : |e.x| > delta ||x||}, the cone around the workload direction.
  static RegionSpec workload_cone(double delta);
};

/// Controlled diffusion dX = b(X,U) dt + Sigma(X) dW with running cost r(X,U).
struct DiffusionModel {
  std::string name;
  int dim = 1;
  DriftFn drift;
  SigmaFn sigma;
  CostFn cost;
  ControlSet controls;
  RegionSpec region_K = RegionSpec::everywhere();
  double nondeg_floor = 1.0;

  Mat diffusion(const Vec& x) const {
    const Mat s = sigma(x);
    return s * s.transpose();
  }
  const Vec& control(std::size_t index) const { return controls.points.at(index); }
};

/// Copy of `model` with its running cost replaced.
DiffusionModel with_cost(const DiffusionModel& model, CostFn cost, std::string suffix = {});

/// Scalar benchmark: b = a x + u, Sigma = sigma, r = q x^2/2 + c u^2/2,
/// `n_controls` equispaced controls on [-u_max, u_max].
DiffusionModel builtin_ou_lq(double a, double sigma, double q, double c, double u_max,
                             int n_controls);

struct WNetworkParams {
  Eigen::Vector3d arrival_rates{1.0, 1.0, 1.0};
  // service_rates(i, j): rate at which pool j (0..1) serves class i (0..2).
  // Only the W pattern (1,1), (2,1), (2,2), (3,2) enters the dynamics.
  Eigen::Matrix<double, 3, 2> service_rates;
  Eigen::Vector3d l_vec{0.0, 0.0, 0.0};
  Eigen::Vector3d cost_weights{1.0, 1.0, 1.0};
  // Idling cost d_j (e.x)^- u^s_j; zero disables it.
  Eigen::Vector2d idle_weights{0.0, 0.0};
  // Control simplices are discretized on the lattice with step 1/divisions.
  int simplex_divisions = 1;
  // Region K = {|e.x| > delta ||x||}.
  double cone_delta = 0.1;
};

WNetworkParams default_w_network_params();

/// Halfin-Whitt limit of the "W" network (three classes, two pools).
/// Controls are u = (u^c in simplex(3), u^s in simplex(2)) stored as a 5-vector.
DiffusionModel builtin_w_network(const WNetworkParams& params);

/// M1 and M2 of the W-network drift.
Eigen::Matrix3d w_network_m1(const Eigen::Matrix<double, 3, 2>& mu);
Eigen::Matrix<double, 3, 2> w_network_m2(const Eigen::Matrix<double, 3, 2>& mu);

// ---------------------------------------------------------------------------
// Declarative polynomial models (config-loadable, no code injection).

struct Monomial {
  double coef = 0.0;
  std::vector<int> x_pow;  // empty means all zero
  std::vector<int> u_pow;
  double eval(const Vec& x, const Vec& u) const;
};

struct PolynomialModelSpec {
  int dim = 1;
  std::vector<std::vector<Monomial>> drift;  // one polynomial per component
  Eigen::MatrixXd sigma;                      // constant dim x dim factor
  std::vector<Monomial> cost;
  std::vector<std::vector<double>> controls;
  double nondeg_floor = 0.0;  // 0: computed as lambda_min(sigma sigma^T)
};

DiffusionModel polynomial_model(const PolynomialModelSpec& spec);

// ---------------------------------------------------------------------------
// Structural hypothesis checks.

/// Log-Lyapunov function (log of the multiplicative Lyapunov function).
/// Derivatives fall back to finite differences when absent.
struct LyapunovLog {
  StateFn value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
};

/// Log-Lyapunov x^T Q x (smooth, so it is its own C^2 blend near the origin).
LyapunovLog quadratic_lyapunov(const Mat& Q);

struct AssumptionConstants {
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 0.5;
};

enum class Inequality { outside_K, inside_K };

struct AssumptionViolation {
  Vec x;
  Vec u;
  Inequality which;
  double slack;
};

struct AssumptionReport {
  std::size_t checked_points = 0;
  std::vector<AssumptionViolation> violations;
  AssumptionConstants constants;
  double worst_slack = 0.0;
  std::vector<double> slacks;  // per sample, in input order
  std::vector<Vec> nondifferentiable_at;

  bool ok() const { return violations.empty() && nondifferentiable_at.empty(); }
};

struct AssumptionCheckOptions {
  double fd_step = 1e-4;
  double slack_tol = 1e-9;
  double hessian_tol = 1e-3;
};

/// Pointwise check of the logarithmic drift inequalities
///   L^u V + |Sigma^T grad V|^2 / 2 <= C1 - hbar   on K^c x U,
///                                   <= C2 + C3 r  on K x U.
AssumptionReport check_assumptions(const DiffusionModel& model, const LyapunovLog& lyap,
                                   const CostFn& hbar, const AssumptionConstants& constants,
                                   const std::vector<std::pair<Vec, Vec>>& samples,
                                   const AssumptionCheckOptions& options = {});

/// Smallest observed z^T A(x) z / |z|^2 over random samples in the box
/// [-radius, radius]^dim.
double sampled_nondegeneracy(const DiffusionModel& model, double radius, int samples,
                             std::uint64_t seed);

/// Largest finite-difference Lipschitz ratio of drift and sigma over random pairs
/// in the ball of the given radius.
double sampled_lipschitz_ratio(const DiffusionModel& model, double radius, int samples,
                               std::uint64_t seed);

}  // namespace ersc

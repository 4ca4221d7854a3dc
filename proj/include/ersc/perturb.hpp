#pragma once

#include "ersc/discretize.hpp"
#include "ersc/hjb.hpp"
#include "ersc/model.hpp"

#include <string>
#include <vector>

namespace ersc {

/// eps0 = (1 - C3) / 8; throws unless 0 < C3 < 1.
double perturbation_budget(double C3);

/// The inf-compact perturbation h and the family r^eps = (1 - eps/eps0) r + eps h.
struct PerturbationFamily {
  double C3 = 0.5;
  double eps0 = 0.0625;
  CostFn r;
  CostFn h;
  CostFn hbar;  // empty when h was supplied directly
  RegionSpec region_K;
  double collar_width = 0.0;
  std::string description;
};

struct PerturbationDiagnostics {
  std::size_t checked = 0;
  double min_lower_slack = 0.0;  // min h - r
  double min_upper_slack = 0.0;  // min (2 + 2 hbar 1_{H^c} + 2 r 1_H) - h
  std::vector<double> shell_radii;
  std::vector<double> shell_minima;  // running tail minimum of min_u h per shell
};

/// h = max(r, 1 + zeta r + (1 - zeta) hbar), where zeta is 1 on
/// H = (K x U) u {r > hbar} and falls to 0 across the collar outside K.
/// The bounds r <= h <= 2 + 2 hbar 1_{H^c} + 2 r 1_H and growth of min_u h over
/// radial shells are checked at every node and control; a failure throws
/// ValidationError naming the offending point.
PerturbationFamily build_h(const DiffusionModel& model, const CostFn& hbar, double C3,
                           double collar_width, const Grid& grid,
                           PerturbationDiagnostics* diagnostics = nullptr);

/// Family with an explicitly given h (checked only for h >= r on the grid).
PerturbationFamily family_from_h(const DiffusionModel& model, CostFn h, double C3,
                                 const Grid& grid);

/// r^eps; eps = 0 returns r itself. Throws unless 0 <= eps < eps0.
CostFn perturbed_cost(const PerturbationFamily& family, double epsilon);

/// Growth surrogate for inf-compactness of min_u f on the grid: running tail minima
/// over `shells` equal-width annuli of the inscribed ball must strictly increase.
bool shells_increasing(const DiffusionModel& model, const CostFn& f, const Grid& grid, int shells,
                       std::vector<double>* radii = nullptr,
                       std::vector<double>* minima = nullptr);

struct EpsilonSweepPoint {
  double epsilon = 0.0;
  double value = 0.0;
  double gap = 0.0;  // |value - value at eps = 0|
  int iterations = 0;
};

struct EpsilonSweep {
  std::vector<EpsilonSweepPoint> points;
  double base_value = 0.0;
  double slope = 0.0;  // least-squares C in gap ~ C eps
};

EpsilonSweep epsilon_sweep(const DiffusionModel& model, const Grid& grid,
                           const PerturbationFamily& family, const std::vector<double>& eps_list,
                           const HjbOptions& options = {});

struct KappaSweepPoint {
  double kappa = 0.0;
  double value = 0.0;      // Lambda^kappa = lambda[kappa r] / kappa
  double zero_gap = 0.0;   // Lambda^kappa - Lambda^0
};

struct KappaSweep {
  std::vector<KappaSweepPoint> points;
  double lambda_zero = 0.0;  // average-cost optimum
};

KappaSweep kappa_sweep(const DiffusionModel& model, const Grid& grid,
                       const std::vector<double>& kappa_list, const HjbOptions& options = {});

}  // namespace ersc

#pragma once

#include "ersc/discretize.hpp"
#include "ersc/eigensolve.hpp"
#include "ersc/model.hpp"
#include "ersc/simulate.hpp"

#include <cstdint>
#include <vector>

namespace ersc {

/// Finite probability space: outcome values with strictly positive probabilities.
struct FiniteNoiseSpace {
  std::vector<double> outcomes;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  /// Throws ValidationError unless probabilities are positive and sum to 1.
  void validate() const;
  /// Random space with `atoms` atoms and Dirichlet(1) weights.
  static FiniteNoiseSpace random(std::size_t atoms, std::uint64_t seed);
};

struct GibbsCheck {
  double lhs = 0.0;  // log E_P exp(f)
  double rhs = 0.0;  // E_Q* f - KL(Q* || P)
  double gap = 0.0;
  std::vector<double> optimizer;  // Q*
};

GibbsCheck gibbs_identity_check(const FiniteNoiseSpace& space, const std::vector<double>& f);

/// E_Q f - KL(Q || P) for an arbitrary probability vector q (zero entries allowed).
double variational_objective(const FiniteNoiseSpace& space, const std::vector<double>& f,
                             const std::vector<double>& q);

/// Feedback drifts w(x) = offset + gain x, scaled by drift_scale.
struct DriftFamily {
  std::vector<Vec> offsets;
  std::vector<Mat> gains;
  double drift_scale = 1.0;

  /// w = theta x for each theta.
  static DriftFamily linear(int dim, const std::vector<double>& thetas);
  /// w = c for each c (scalar multiples of the all-ones vector).
  static DriftFamily constants(int dim, const std::vector<double>& values);
  std::size_t size() const { return offsets.size(); }
};

struct DriftCandidateValue {
  Vec offset;
  Mat gain;
  double value = 0.0;  // E[(1/T) int (r - |w|^2/2) dt]
  double std_error = 0.0;
};

struct DriftClassGap {
  double log_mgf = 0.0;
  double log_mgf_std_error = 0.0;
  double best_inner = 0.0;
  double best_inner_std_error = 0.0;
  std::size_t best_index = 0;
  double gap = 0.0;  // log_mgf - best_inner
  std::vector<DriftCandidateValue> candidates;
};

/// Compares (1/T) log E exp(int r) (ground-diffusion importance sampling) with
/// the best inner value over the drift family, all candidates sharing the same
/// Gaussian increments.
DriftClassGap drift_class_gap(const DiffusionModel& model, const Controller& controller,
                              const Grid& grid, const Eigenpair& pair,
                              const SimulationConfig& cfg, const DriftFamily& family);

/// Inner value of a single feedback drift.
DriftCandidateValue drift_inner_value(const DiffusionModel& model, const Controller& controller,
                                      const Vec& offset, const Mat& gain, double drift_scale,
                                      const SimulationConfig& cfg);

}  // namespace ersc

#include "ersc/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ersc {

void FiniteNoiseSpace::validate() const {
  if (probs.empty()) throw ValidationError("FiniteNoiseSpace: no atoms");
  if (!outcomes.empty() && outcomes.size() != probs.size())
    throw ValidationError("FiniteNoiseSpace: outcomes and probabilities differ in length");
  for (const double p : probs)
    if (!(p > 0.0)) throw ValidationError("FiniteNoiseSpace: probabilities must be > 0");
  const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-15 * static_cast<double>(probs.size()) + 1e-15)
    throw ValidationError("FiniteNoiseSpace: probabilities do not sum to 1");
}

FiniteNoiseSpace FiniteNoiseSpace::random(std::size_t atoms, std::uint64_t seed) {
  if (atoms == 0) throw ValidationError("FiniteNoiseSpace::random: atoms must be >= 1");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  FiniteNoiseSpace s;
  s.probs.resize(atoms);
  s.outcomes.resize(atoms);
  for (std::size_t i = 0; i < atoms; ++i) {
    s.probs[i] = ex(rng) + 1e-300;
    s.outcomes[i] = static_cast<double>(i);
  }
  const double tot = std::accumulate(s.probs.begin(), s.probs.end(), 0.0);
  for (auto& p : s.probs) p /= tot;
  return s;
}

GibbsCheck gibbs_identity_check(const FiniteNoiseSpace& space, const std::vector<double>& f) {
  space.validate();
  if (f.size() != space.size()) throw ValidationError("gibbs_identity_check: f has the wrong length");
  for (const double v : f)
    if (!std::isfinite(v)) throw ValidationError("gibbs_identity_check: f must be finite");
  const double m = *std::max_element(f.begin(), f.end());
  double z = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) z += space.probs[i] * std::exp(f[i] - m);
  GibbsCheck out;
  out.lhs = m + std::log(z);
  out.optimizer.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out.optimizer[i] = space.probs[i] * std::exp(f[i] - m) / z;
  out.rhs = variational_objective(space, f, out.optimizer);
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

double variational_objective(const FiniteNoiseSpace& space, const std::vector<double>& f,
                             const std::vector<double>& q) {
  if (f.size() != space.size() || q.size() != space.size())
    throw ValidationError("variational_objective: length mismatch");
  double ef = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0.0) throw ValidationError("variational_objective: negative probability");
    if (q[i] == 0.0) continue;
    ef += q[i] * f[i];
    kl += q[i] * (std::log(q[i]) - std::log(space.probs[i]));
  }
  return ef - kl;
}

DriftFamily DriftFamily::linear(int dim, const std::vector<double>& thetas) {
  DriftFamily fam;
  for (const double t : thetas) {
    fam.offsets.push_back(Vec::Zero(dim));
    fam.gains.push_back(t * Mat::Identity(dim, dim));
  }
  return fam;
}

DriftFamily DriftFamily::constants(int dim, const std::vector<double>& values) {
  DriftFamily fam;
  for (const double c : values) {
    fam.offsets.push_back(Vec::Constant(dim, c));
    fam.gains.push_back(Mat::Zero(dim, dim));
  }
  return fam;
}

DriftCandidateValue drift_inner_value(const DiffusionModel& model, const Controller& controller,
                                      const Vec& offset, const Mat& gain, double drift_scale,
                                      const SimulationConfig& cfg) {
  if (offset.size() != model.dim || gain.rows() != model.dim || gain.cols() != model.dim)
    throw ValidationError("drift_inner_value: family member has the wrong dimension");
  const Vec c = drift_scale * offset;
  const Mat k = drift_scale * gain;
  const AuxField w = [c, k](const Vec& x) -> Vec { return c + k * x; };
  SimulationConfig sc = cfg;
  sc.likelihood_ratio = false;
  const PathEnsemble ens = simulate(model, controller, &w, sc);
  double s1 = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < ens.size(); ++p) {
    if (!ens.valid[p]) continue;
    const double v = (ens.cost_integral[p] - ens.penalty_integral[p]) / ens.T;
    s1 += v;
    s2 += v * v;
    ++n;
  }
  if (n == 0) throw ValidationError("drift_inner_value: no valid paths");
  DriftCandidateValue out;
  out.offset = offset;
  out.gain = gain;
  const double dn = static_cast<double>(n);
  out.value = s1 / dn;
  out.std_error = n > 1 ? std::sqrt(std::max(0.0, (s2 - dn * out.value * out.value) / (dn - 1)) / dn) : 0.0;
  return out;
}

DriftClassGap drift_class_gap(const DiffusionModel& model, const Controller& controller,
                              const Grid& grid, const Eigenpair& pair,
                              const SimulationConfig& cfg, const DriftFamily& family) {
  if (family.size() == 0 || family.gains.size() != family.offsets.size())
    throw ValidationError("drift_class_gap: empty or ragged drift family");
  DriftClassGap out;
  const RscEstimate lhs = importance_sampled_cost(model, controller, grid, pair, cfg);
  out.log_mgf = lhs.estimate;
  out.log_mgf_std_error = lhs.std_error;
  for (std::size_t j = 0; j < family.size(); ++j) {
    out.candidates.push_back(drift_inner_value(model, controller, family.offsets[j],
                                               family.gains[j], family.drift_scale, cfg));
    if (j == 0 || out.candidates[j].value > out.candidates[out.best_index].value) out.best_index = j;
  }
  out.best_inner = out.candidates[out.best_index].value;
  out.best_inner_std_error = out.candidates[out.best_index].std_error;
  out.gap = out.log_mgf - out.best_inner;
  return out;
}

}  // namespace ersc

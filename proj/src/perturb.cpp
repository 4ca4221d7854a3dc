#include "ersc/perturb.hpp"

#include "ersc/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ersc {

namespace {

std::string point_string(const Vec& x, const Vec& u) {
  std::ostringstream os;
  os << "x = (";
  for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << "), u = (";
  for (Eigen::Index k = 0; k < u.size(); ++k) os << (k ? ", " : "") << u[k];
  os << ")";
  return os.str();
}

}  // namespace

double perturbation_budget(double C3) {
  if (!(C3 > 0.0 && C3 < 1.0)) throw ValidationError("C3 must lie in (0, 1)");
  return (1.0 - C3) / 8.0;
}

bool shells_increasing(const DiffusionModel& model, const CostFn& f, const Grid& grid, int shells,
                       std::vector<double>* radii, std::vector<double>* minima) {
  if (shells < 2) throw ValidationError("shells_increasing: need at least two shells");
  const double R = *std::min_element(grid.radii().begin(), grid.radii().end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> m(static_cast<std::size_t>(shells), inf);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    const double rad = x.norm();
    if (rad > R) continue;
    const int k = std::min(shells - 1, static_cast<int>(rad / R * shells));
    for (std::size_t c = 0; c < model.controls.size(); ++c)
      m[static_cast<std::size_t>(k)] = std::min(m[static_cast<std::size_t>(k)], f(x, model.control(c)));
  }
  std::vector<double> tail_r, tail_m;
  double running = inf;
  for (int k = shells - 1; k >= 0; --k) {
    if (m[static_cast<std::size_t>(k)] == inf) continue;
    running = std::min(running, m[static_cast<std::size_t>(k)]);
    tail_r.push_back(R * k / shells);
    tail_m.push_back(running);
  }
  std::reverse(tail_r.begin(), tail_r.end());
  std::reverse(tail_m.begin(), tail_m.end());
  bool ok = tail_m.size() >= 2;
  for (std::size_t k = 1; k < tail_m.size(); ++k) ok = ok && tail_m[k] > tail_m[k - 1];
  if (radii) *radii = tail_r;
  if (minima) *minima = tail_m;
  return ok;
}

PerturbationFamily build_h(const DiffusionModel& model, const CostFn& hbar, double C3,
                           double collar_width, const Grid& grid,
                           PerturbationDiagnostics* diagnostics) {
  if (!(collar_width > 0.0)) throw ValidationError("build_h: collar width must be > 0");
  if (model.dim != grid.dim()) throw ValidationError("build_h: dimension mismatch");
  PerturbationFamily fam;
  fam.C3 = C3;
  fam.eps0 = perturbation_budget(C3);
  fam.r = model.cost;
  fam.hbar = hbar;
  fam.region_K = model.region_K;
  fam.collar_width = collar_width;
  fam.description = "blend(r, hbar) over " + model.region_K.description;

  const CostFn r = model.cost;
  const RegionSpec K = model.region_K;
  fam.h = [r, hbar, K, collar_width](const Vec& x, const Vec& u) {
    const double rv = r(x, u);
    const double hv = hbar(x, u);
    const double zeta = rv > hv ? 1.0 : K.blend(x, collar_width);
    return std::max(rv, 1.0 + zeta * rv + (1.0 - zeta) * hv);
  };

  PerturbationDiagnostics diag;
  diag.min_lower_slack = diag.min_upper_slack = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    for (std::size_t c = 0; c < model.controls.size(); ++c) {
      const Vec& u = model.control(c);
      const double rv = r(x, u);
      const double hv = hbar(x, u);
      const double h = fam.h(x, u);
      const bool in_H = K.contains(x) || rv > hv;
      const double upper = 2.0 + (in_H ? 2.0 * rv : 2.0 * hv);
      const double lo = h - rv;
      const double up = upper - h;
      diag.min_lower_slack = std::min(diag.min_lower_slack, lo);
      diag.min_upper_slack = std::min(diag.min_upper_slack, up);
      ++diag.checked;
      if (!(lo >= 0.0) || !(up >= -1e-12 * (1.0 + std::abs(upper))))
        throw ValidationError("build_h: bound r <= h <= 2 + 2 hbar 1_{H^c} + 2 r 1_H fails at " +
                              point_string(x, u));
    }
  }
  if (!shells_increasing(model, fam.h, grid, 8, &diag.shell_radii, &diag.shell_minima))
    throw ValidationError("build_h: min_u h does not grow over radial shells (hbar not inf-compact?)");
  if (diagnostics) *diagnostics = std::move(diag);
  return fam;
}

PerturbationFamily family_from_h(const DiffusionModel& model, CostFn h, double C3,
                                 const Grid& grid) {
  PerturbationFamily fam;
  fam.C3 = C3;
  fam.eps0 = perturbation_budget(C3);
  fam.r = model.cost;
  fam.h = std::move(h);
  fam.region_K = model.region_K;
  fam.description = "explicit h";
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    for (std::size_t c = 0; c < model.controls.size(); ++c) {
      const Vec& u = model.control(c);
      if (!(fam.h(x, u) >= fam.r(x, u)))
        throw ValidationError("family_from_h: h < r at " + point_string(x, u));
    }
  }
  return fam;
}

CostFn perturbed_cost(const PerturbationFamily& family, double epsilon) {
  if (!(epsilon >= 0.0) || !(epsilon < family.eps0)) {
    std::ostringstream msg;
    msg << "epsilon = " << epsilon << " must satisfy 0 <= epsilon < eps0 = (1-C3)/8 = "
        << family.eps0;
    throw ValidationError(msg.str());
  }
  if (epsilon == 0.0) return family.r;
  const double a = 1.0 - epsilon / family.eps0;
  return [r = family.r, h = family.h, a, epsilon](const Vec& x, const Vec& u) {
    return a * r(x, u) + epsilon * h(x, u);
  };
}

EpsilonSweep epsilon_sweep(const DiffusionModel& model, const Grid& grid,
                           const PerturbationFamily& family, const std::vector<double>& eps_list,
                           const HjbOptions& options) {
  if (std::find(eps_list.begin(), eps_list.end(), 0.0) == eps_list.end())
    throw ValidationError("epsilon_sweep: epsilon list must include 0");
  for (const double e : eps_list) perturbed_cost(family, e);  // range check up front

  EpsilonSweep out;
  HjbOptions opt = options;
  const HjbSolution base = solve_hjb(model, grid, opt);
  out.base_value = base.value;
  opt.initial_policy = base.policy;
  double num = 0.0;
  double den = 0.0;
  for (const double e : eps_list) {
    EpsilonSweepPoint p;
    p.epsilon = e;
    if (e == 0.0) {
      p.value = base.value;
      p.iterations = base.iterations;
    } else {
      const HjbSolution s = solve_hjb(with_cost(model, perturbed_cost(family, e), "eps"), grid, opt);
      p.value = s.value;
      p.iterations = s.iterations;
    }
    p.gap = std::abs(p.value - base.value);
    num += e * p.gap;
    den += e * e;
    out.points.push_back(p);
  }
  out.slope = den > 0.0 ? num / den : 0.0;
  return out;
}

KappaSweep kappa_sweep(const DiffusionModel& model, const Grid& grid,
                       const std::vector<double>& kappa_list, const HjbOptions& options) {
  for (const double k : kappa_list)
    if (!(k > 0.0 && k <= 1.0)) throw ValidationError("kappa must lie in (0, 1]");
  KappaSweep out;
  const AverageCostSolution zero = solve_average_cost(model, grid, 1e-12, options.max_iter,
                                                      options.scheme);
  out.lambda_zero = zero.value;
  HjbOptions opt = options;
  for (const double k : kappa_list) {
    // The eigenvalue scales like kappa; tighten the tolerance to keep lambda/kappa accurate.
    opt.tol = options.tol * k;
    const CostFn scaled = [r = model.cost, k](const Vec& x, const Vec& u) { return k * r(x, u); };
    const HjbSolution s = solve_hjb(with_cost(model, scaled, "kappa"), grid, opt);
    KappaSweepPoint p;
    p.kappa = k;
    p.value = s.value / k;
    p.zero_gap = p.value - out.lambda_zero;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace ersc

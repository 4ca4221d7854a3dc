#include "ersc/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ersc {

void ControlSet::validate() const {
  if (points.empty()) throw ValidationError("control set is empty");
  const auto n = points.front().size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != n) throw ValidationError("control points have mixed dimensions");
    for (std::size_t j = 0; j < i; ++j) {
      if ((points[i] - points[j]).norm() == 0.0) {
        std::ostringstream msg;
        msg << "duplicate control points at indices " << j << " and " << i;
        throw ValidationError(msg.str());
      }
    }
  }
}

double RegionSpec::blend(const Vec& x, double collar_width) const {
  const double m = margin(x);
  if (m >= 0.0) return 1.0;
  if (collar_width <= 0.0) return 0.0;
  return std::clamp(1.0 + m / collar_width, 0.0, 1.0);
}

RegionSpec RegionSpec::everywhere() {
  return {[](const Vec&) { return std::numeric_limits<double>::infinity(); }, "all"};
}

RegionSpec RegionSpec::empty() {
  return {[](const Vec&) { return -std::numeric_limits<double>::infinity(); }, "none"};
}

RegionSpec RegionSpec::ball(double radius) {
  return {[radius](const Vec& x) { return radius - x.norm(); }, "ball"};
}

RegionSpec RegionSpec::workload_cone(double delta) {
  return {[delta](const Vec& x) { return std::abs(x.sum()) - delta * x.norm(); },
          "workload_cone"};
}

DiffusionModel with_cost(const DiffusionModel& model, CostFn cost, std::string suffix) {
  DiffusionModel out = model;
  out.cost = std::move(cost);
  if (!suffix.empty()) out.name += suffix;
  return out;
}

DiffusionModel builtin_ou_lq(double a, double sigma, double q, double c, double u_max,
                             int n_controls) {
  if (!(sigma > 0.0)) throw ValidationError("ou_lq: sigma must be positive");
  if (n_controls < 1) throw ValidationError("ou_lq: n_controls must be >= 1");
  if (u_max < 0.0) throw ValidationError("ou_lq: u_max must be nonnegative");
  if (q < 0.0 || c < 0.0) throw ValidationError("ou_lq: q and c must be nonnegative");
  if (n_controls > 1 && u_max == 0.0)
    throw ValidationError("ou_lq: several controls need u_max > 0");

  DiffusionModel m;
  m.name = "ou_lq";
  m.dim = 1;
  m.drift = [a](const Vec& x, const Vec& u) {
    Vec b(1);
    b[0] = a * x[0] + u[0];
    return b;
  };
  m.sigma = [sigma](const Vec&) { return Mat::Constant(1, 1, sigma); };
  m.cost = [q, c](const Vec& x, const Vec& u) {
    return 0.5 * q * x[0] * x[0] + 0.5 * c * u[0] * u[0];
  };
  for (int k = 0; k < n_controls; ++k) {
    Vec u(1);
    u[0] = n_controls == 1 ? 0.0 : -u_max + 2.0 * u_max * k / (n_controls - 1);
    m.controls.points.push_back(u);
  }
  m.controls.description = "equispaced on [-u_max, u_max]";
  m.region_K = RegionSpec::everywhere();
  m.nondeg_floor = sigma * sigma;
  return m;
}

WNetworkParams default_w_network_params() {
  WNetworkParams p;
  p.arrival_rates = {1.0, 1.0, 1.0};
  p.service_rates << 1.0, 0.0,  //
      1.0, 1.5,                 //
      0.0, 1.0;
  p.l_vec = {-0.5, -0.5, -0.5};
  p.cost_weights = {1.0, 2.0, 1.5};
  p.idle_weights = {0.5, 0.5};
  p.simplex_divisions = 1;
  p.cone_delta = 0.1;
  return p;
}

Eigen::Matrix3d w_network_m1(const Eigen::Matrix<double, 3, 2>& mu) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = mu(0, 0);
  m(1, 0) = mu(1, 1) - mu(1, 0);
  m(1, 1) = mu(1, 1);
  m(2, 2) = mu(2, 1);
  return m;
}

Eigen::Matrix<double, 3, 2> w_network_m2(const Eigen::Matrix<double, 3, 2>& mu) {
  Eigen::Matrix<double, 3, 2> m = Eigen::Matrix<double, 3, 2>::Zero();
  m(1, 0) = mu(1, 0) - mu(1, 1);
  return m;
}

namespace {

// Lattice points of the probability simplex in `parts` coordinates with step 1/k.
void simplex_lattice(int parts, int k, std::vector<std::vector<double>>& out) {
  std::vector<int> counts(parts, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == parts - 1) {
      counts[pos] = left;
      std::vector<double> p(parts);
      for (int i = 0; i < parts; ++i) p[i] = static_cast<double>(counts[i]) / k;
      out.push_back(std::move(p));
      return;
    }
    for (int c = left; c >= 0; --c) {
      counts[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, k);
}

}  // namespace

DiffusionModel builtin_w_network(const WNetworkParams& p) {
  if ((p.arrival_rates.array() <= 0.0).any())
    throw ValidationError("w_network: arrival rates must be positive");
  const double mu11 = p.service_rates(0, 0), mu21 = p.service_rates(1, 0),
               mu22 = p.service_rates(1, 1), mu32 = p.service_rates(2, 1);
  if (!(mu11 > 0 && mu21 > 0 && mu22 > 0 && mu32 > 0))
    throw ValidationError("w_network: service rates mu11, mu21, mu22, mu32 must be positive");
  if ((p.cost_weights.array() <= 0.0).any())
    throw ValidationError("w_network: cost weights must be positive");
  if ((p.idle_weights.array() < 0.0).any())
    throw ValidationError("w_network: idle weights must be nonnegative");
  if (p.simplex_divisions < 1) throw ValidationError("w_network: simplex_divisions >= 1");
  if (!(p.cone_delta > 0.0 && p.cone_delta < 1.0))
    throw ValidationError("w_network: cone_delta must lie in (0, 1)");

  const Eigen::Matrix3d m1 = w_network_m1(p.service_rates);
  const Eigen::Matrix<double, 3, 2> m2 = w_network_m2(p.service_rates);
  const Eigen::Vector3d l = p.l_vec;
  const Eigen::Vector3d c = p.cost_weights;
  const Eigen::Vector2d d = p.idle_weights;

  DiffusionModel m;
  m.name = "w_network";
  m.dim = 3;
  m.drift = [m1, m2, l](const Vec& x, const Vec& u) {
    const Eigen::Vector3d xv = x.head<3>();
    const double ex = xv.sum();
    const Eigen::Vector3d uc = u.head<3>();
    const Eigen::Vector2d us = u.segment<2>(3);
    const Eigen::Vector3d b =
        l - m1 * (xv - std::max(ex, 0.0) * uc) + std::max(-ex, 0.0) * (m2 * us);
    return Vec(b);
  };
  const Eigen::Vector3d diag = (2.0 * p.arrival_rates).cwiseSqrt();
  m.sigma = [diag](const Vec&) { return Mat(diag.asDiagonal().toDenseMatrix()); };
  m.cost = [c, d](const Vec& x, const Vec& u) {
    const double ex = x.head<3>().sum();
    return std::max(ex, 0.0) * c.dot(u.head<3>()) +
           std::max(-ex, 0.0) * d.dot(u.segment<2>(3));
  };

  std::vector<std::vector<double>> uc_pts, us_pts;
  simplex_lattice(3, p.simplex_divisions, uc_pts);
  simplex_lattice(2, p.simplex_divisions, us_pts);
  for (const auto& a : uc_pts) {
    for (const auto& b : us_pts) {
      Vec u(5);
      u << a[0], a[1], a[2], b[0], b[1];
      m.controls.points.push_back(u);
    }
  }
  m.controls.description = "simplex(3) x simplex(2) lattice";
  m.region_K = RegionSpec::workload_cone(p.cone_delta);
  m.nondeg_floor = 2.0 * p.arrival_rates.minCoeff();
  return m;
}

double Monomial::eval(const Vec& x, const Vec& u) const {
  double v = coef;
  for (std::size_t i = 0; i < x_pow.size(); ++i)
    if (x_pow[i] != 0) v *= std::pow(x[static_cast<Eigen::Index>(i)], x_pow[i]);
  for (std::size_t i = 0; i < u_pow.size(); ++i)
    if (u_pow[i] != 0) v *= std::pow(u[static_cast<Eigen::Index>(i)], u_pow[i]);
  return v;
}

DiffusionModel polynomial_model(const PolynomialModelSpec& spec) {
  if (spec.dim < 1 || spec.dim > kMaxDim) throw ValidationError("polynomial: bad dim");
  if (static_cast<int>(spec.drift.size()) != spec.dim)
    throw ValidationError("polynomial: drift needs one polynomial per component");
  if (spec.sigma.rows() != spec.dim || spec.sigma.cols() != spec.dim)
    throw ValidationError("polynomial: sigma must be dim x dim");
  if (spec.controls.empty()) throw ValidationError("polynomial: no controls");
  const auto n_u = spec.controls.front().size();
  if (n_u < 1 || static_cast<int>(n_u) > kMaxDim)
    throw ValidationError("polynomial: bad control dimension");
  auto check_mono = [&](const Monomial& mo) {
    if (static_cast<int>(mo.x_pow.size()) > spec.dim || mo.u_pow.size() > n_u)
      throw ValidationError("polynomial: monomial exponent list too long");
    for (int e : mo.x_pow)
      if (e < 0) throw ValidationError("polynomial: negative exponent");
    for (int e : mo.u_pow)
      if (e < 0) throw ValidationError("polynomial: negative exponent");
  };
  for (const auto& poly : spec.drift)
    for (const auto& mo : poly) check_mono(mo);
  for (const auto& mo : spec.cost) check_mono(mo);

  const Eigen::MatrixXd a = spec.sigma * spec.sigma.transpose();
  const double lam_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues()(0);
  if (!(lam_min > 0.0)) throw ValidationError("polynomial: sigma sigma^T is not positive definite");

  DiffusionModel m;
  m.name = "polynomial";
  m.dim = spec.dim;
  m.drift = [drift = spec.drift](const Vec& x, const Vec& u) {
    Vec b = Vec::Zero(static_cast<Eigen::Index>(drift.size()));
    for (std::size_t k = 0; k < drift.size(); ++k)
      for (const auto& mo : drift[k]) b[static_cast<Eigen::Index>(k)] += mo.eval(x, u);
    return b;
  };
  m.sigma = [s = Mat(spec.sigma)](const Vec&) { return s; };
  m.cost = [cost = spec.cost](const Vec& x, const Vec& u) {
    double v = 0.0;
    for (const auto& mo : cost) v += mo.eval(x, u);
    return v;
  };
  for (const auto& c : spec.controls) {
    if (c.size() != n_u) throw ValidationError("polynomial: ragged control list");
    Vec u(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) u[static_cast<Eigen::Index>(i)] = c[i];
    m.controls.points.push_back(u);
  }
  m.controls.validate();
  m.controls.description = "declared";
  m.nondeg_floor = spec.nondeg_floor > 0.0 ? spec.nondeg_floor : lam_min;
  return m;
}

LyapunovLog quadratic_lyapunov(const Mat& Q) {
  LyapunovLog v;
  v.value = [Q](const Vec& x) { return x.dot(Q * x); };
  v.gradient = [Q](const Vec& x) { return Vec((Q + Q.transpose()) * x); };
  v.hessian = [Q](const Vec&) { return Mat(Q + Q.transpose()); };
  return v;
}

namespace {

Vec fd_gradient(const StateFn& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Forward and backward differences of the central gradient. For a C^2 function
// both are symmetric and agree to O(h); kinks break one or the other.
bool fd_hessian(const StateFn& f, const Vec& x, double h, double tol, Mat& out) {
  const auto d = x.size();
  Mat fwd(d, d), bwd(d, d);
  const Vec g0 = fd_gradient(f, x, h);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    fwd.col(j) = (fd_gradient(f, xp, h) - g0) / h;
    bwd.col(j) = (g0 - fd_gradient(f, xm, h)) / h;
  }
  out = 0.25 * (fwd + fwd.transpose() + bwd + bwd.transpose());
  const double scale = 1.0 + out.cwiseAbs().maxCoeff();
  const double asym = (fwd - fwd.transpose()).cwiseAbs().maxCoeff();
  const double mismatch = (fwd - bwd).cwiseAbs().maxCoeff();
  return asym <= tol * scale && mismatch <= tol * scale;
}

}  // namespace

AssumptionReport check_assumptions(const DiffusionModel& model, const LyapunovLog& lyap,
                                   const CostFn& hbar, const AssumptionConstants& constants,
                                   const std::vector<std::pair<Vec, Vec>>& samples,
                                   const AssumptionCheckOptions& options) {
  if (!(constants.C3 < 1.0)) throw ValidationError("check_assumptions: C3 must be < 1");
  if (!(constants.C1 > 0 && constants.C2 > 0 && constants.C3 > 0))
    throw ValidationError("check_assumptions: constants must be positive");
  if (!lyap.value) throw ValidationError("check_assumptions: Lyapunov function missing");

  AssumptionReport rep;
  rep.constants = constants;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  rep.slacks.reserve(samples.size());
  for (const auto& [x, u] : samples) {
    Vec grad;
    Mat hess;
    if (lyap.gradient && lyap.hessian) {
      grad = lyap.gradient(x);
      hess = lyap.hessian(x);
    } else {
      grad = lyap.gradient ? lyap.gradient(x) : fd_gradient(lyap.value, x, options.fd_step);
      if (!fd_hessian(lyap.value, x, options.fd_step, options.hessian_tol, hess))
        rep.nondifferentiable_at.push_back(x);
    }
    const Mat s = model.sigma(x);
    const Mat a = s * s.transpose();
    const Vec sg = s.transpose() * grad;
    const double lhs = model.drift(x, u).dot(grad) + 0.5 * (a.cwiseProduct(hess)).sum() +
                       0.5 * sg.squaredNorm();
    const bool inside = model.region_K.contains(x);
    const double rhs = inside ? constants.C2 + constants.C3 * model.cost(x, u)
                              : constants.C1 - hbar(x, u);
    const double slack = rhs - lhs;
    rep.slacks.push_back(slack);
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (slack < -options.slack_tol)
      rep.violations.push_back(
          {x, u, inside ? Inequality::inside_K : Inequality::outside_K, slack});
    ++rep.checked_points;
  }
  return rep;
}

double sampled_nondegeneracy(const DiffusionModel& model, double radius, int samples,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  std::normal_distribution<double> gauss;
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec x(model.dim), z(model.dim);
    for (int i = 0; i < model.dim; ++i) {
      x[i] = box(rng);
      z[i] = gauss(rng);
    }
    const double zz = z.squaredNorm();
    if (zz == 0.0) continue;
    worst = std::min(worst, z.dot(model.diffusion(x) * z) / zz);
  }
  return worst;
}

double sampled_lipschitz_ratio(const DiffusionModel& model, double radius, int samples,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    Vec x(model.dim);
    for (int i = 0; i < model.dim; ++i) x[i] = gauss(rng);
    const double r = radius * std::pow(unit(rng), 1.0 / model.dim);
    return Vec(x * (r / std::max(x.norm(), 1e-300)));
  };
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vec x = draw(), y = draw();
    const double dxy = (x - y).norm();
    if (dxy < 1e-12) continue;
    for (const auto& u : model.controls.points) {
      worst = std::max(worst, (model.drift(x, u) - model.drift(y, u)).norm() / dxy);
    }
    worst = std::max(worst, (model.sigma(x) - model.sigma(y)).norm() / dxy);
  }
  return worst;
}

}  // namespace ersc

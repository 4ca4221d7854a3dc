#include "ersc/simulate.hpp"

#include "ersc/hjb.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <mutex>
#include <thread>
#include <tuple>

namespace ersc {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_open(std::uint64_t bits) {
  // (0, 1]
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t path,
                                              std::uint64_t pair) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ path);
  key = splitmix64(key ^ pair);
  const double u1 = unit_open(key);
  const double u2 = unit_open(splitmix64(key));
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

Controller Controller::constant(int control) {
  Controller c;
  const MarkovPolicy::Mixture mix{{control, 1.0}};
  c.mixture = [mix](const Vec&) -> const MarkovPolicy::Mixture& { return mix; };
  return c;
}

Controller Controller::from_policy(const Grid& grid, const MarkovPolicy& policy) {
  if (policy.size() != static_cast<std::size_t>(grid.size()))
    throw ValidationError("Controller::from_policy: policy size does not match grid");
  bool uniform = true;
  for (const auto& m : policy.assignment) uniform = uniform && m == policy.assignment.front();
  if (uniform && !policy.assignment.empty()) {
    Controller c;
    c.mixture = [mix = policy.assignment.front()](const Vec&) -> const MarkovPolicy::Mixture& {
      return mix;
    };
    return c;
  }
  Controller c;
  c.mixture = [grid, policy](const Vec& x) -> const MarkovPolicy::Mixture& {
    return policy.assignment[static_cast<std::size_t>(grid.nearest_node(x))];
  };
  return c;
}

AuxField constant_aux(const Vec& c) {
  return [c](const Vec&) { return c; };
}

AuxField aux_from_policy(const Grid& grid, const AuxiliaryPolicy& aux) {
  if (aux.field.size() != static_cast<std::size_t>(grid.size()))
    throw ValidationError("aux_from_policy: field size does not match grid");
  return [grid, field = aux.field](const Vec& x) {
    return field[static_cast<std::size_t>(grid.nearest_node(x))];
  };
}

namespace {

// Cell corner and fractional offsets of x; returns whether x had to be clamped.
bool locate(const Grid& grid, const Vec& x, Eigen::Index& base, std::array<double, kMaxDim>& frac) {
  bool clipped = false;
  base = 0;
  for (int k = 0; k < grid.dim(); ++k) {
    const double R = grid.radii()[static_cast<std::size_t>(k)];
    double xk = x[k];
    if (xk < -R || xk > R) {
      clipped = true;
      xk = std::clamp(xk, -R, R);
    }
    const int n = grid.counts()[static_cast<std::size_t>(k)];
    const double s = (xk + R) / grid.spacing(k);
    int i = std::min(static_cast<int>(std::floor(s)), n - 2);
    i = std::max(i, 0);
    frac[static_cast<std::size_t>(k)] = std::clamp(s - i, 0.0, 1.0);
    base += static_cast<Eigen::Index>(i) * grid.stride(k);
  }
  return clipped;
}

template <class Get, class Acc>
void multilinear(const Grid& grid, const Vec& x, bool* clipped, Get get, Acc& acc) {
  Eigen::Index base = 0;
  std::array<double, kMaxDim> frac{};
  const bool c = locate(grid, x, base, frac);
  if (clipped) *clipped = c;
  const int d = grid.dim();
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    Eigen::Index node = base;
    for (int k = 0; k < d; ++k) {
      const bool hi = (corner >> k) & 1;
      w *= hi ? frac[static_cast<std::size_t>(k)] : 1.0 - frac[static_cast<std::size_t>(k)];
      if (hi) node += grid.stride(k);
    }
    if (w != 0.0) acc += w * get(node);
  }
}

}  // namespace

double interpolate(const Grid& grid, const NodeVector& f, const Vec& x, bool* clipped) {
  double acc = 0.0;
  multilinear(grid, x, clipped, [&](Eigen::Index i) { return f[i]; }, acc);
  return acc;
}

AuxField interpolate_field(const Grid& grid, const std::vector<Vec>& field) {
  if (field.size() != static_cast<std::size_t>(grid.size()))
    throw ValidationError("interpolate_field: field size does not match grid");
  return [grid, field](const Vec& x) {
    Vec acc = Vec::Zero(grid.dim());
    multilinear(grid, x, nullptr, [&](Eigen::Index i) { return field[static_cast<std::size_t>(i)]; },
                acc);
    return acc;
  };
}

void SimulationConfig::validate(int dim) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("simulation: dt must be > 0");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("simulation: T must be > 0");
  if (dt > T) throw ValidationError("simulation: dt must not exceed T");
  if (n_paths < 1) throw ValidationError("simulation: n_paths must be >= 1");
  if (antithetic && n_paths % 2 != 0)
    throw ValidationError("simulation: antithetic sampling needs an even n_paths");
  if (x0.size() != dim) throw ValidationError("simulation: x0 has the wrong dimension");
  if (workers < 1) throw ValidationError("simulation: workers must be >= 1");
  if (hit_radius && !(*hit_radius > 0.0)) throw ValidationError("simulation: hit radius must be > 0");
  if (mem_grid && mem_grid->dim() != dim) throw ValidationError("simulation: MEM grid dimension");
}

std::int64_t SimulationConfig::steps() const {
  return static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t block = (n + w - 1) / w;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = t * block;
    const std::size_t hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::uint64_t PathEnsemble::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t p = 0; p < size(); ++p) {
    for (Eigen::Index k = 0; k < terminal[p].size(); ++k) mix(terminal[p][k]);
    mix(cost_integral[p]);
    mix(penalty_integral[p]);
    mix(log_likelihood[p]);
    mix(hit_time[p]);
    mix(valid[p] ? 1.0 : 0.0);
  }
  for (const double m : mem) mix(m);
  return h;
}

PathEnsemble simulate(const DiffusionModel& model, const Controller& controller,
                      const AuxField* aux, const SimulationConfig& cfg) {
  cfg.validate(model.dim);
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  const std::int64_t steps = cfg.steps();
  const int d = model.dim;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  PathEnsemble ens;
  ens.T = cfg.T;
  ens.dt = cfg.dt;
  ens.terminal.assign(n, cfg.x0);
  ens.cost_integral.assign(n, 0.0);
  ens.penalty_integral.assign(n, 0.0);
  ens.log_likelihood.assign(n, 0.0);
  ens.hit_time.assign(n, nan);
  ens.valid.assign(n, 1);
  ens.mem_grid = cfg.mem_grid;

  const std::size_t bins = cfg.mem_grid ? static_cast<std::size_t>(cfg.mem_grid->size()) + 1 : 0;
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n)));
  std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(workers),
                                                std::vector<std::int64_t>(bins, 0));
  const std::size_t block = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
  const double R2 = cfg.hit_radius ? *cfg.hit_radius * *cfg.hit_radius : -1.0;

  auto run_path = [&](std::size_t p) {
    std::vector<std::int64_t>& hist = counts[p / block];
    const std::uint64_t key = cfg.antithetic ? p / 2 : p;
    const double sign = cfg.antithetic && (p % 2 == 1) ? -1.0 : 1.0;
    Vec x = cfg.x0;
    Vec xi(d);
    double cost = 0.0, pen = 0.0, ll = 0.0;
    double t = 0.0;
    std::uint64_t index = 0;
    std::pair<double, double> normals{0.0, 0.0};
    if (R2 >= 0.0 && x.squaredNorm() <= R2) {
      ens.hit_time[p] = 0.0;
      if (cfg.stop_at_hit) {
        ens.terminal[p] = x;
        return;
      }
    }
    for (std::int64_t s = 0; s < steps; ++s) {
      const double h = std::min(cfg.dt, cfg.T - static_cast<double>(s) * cfg.dt);
      const double sq = std::sqrt(h);
      const auto& mix = controller.mixture(x);
      Vec b = Vec::Zero(d);
      double r = 0.0;
      for (const auto& [c, w] : mix) {
        const Vec& u = model.control(static_cast<std::size_t>(c));
        b += w * model.drift(x, u);
        r += w * model.cost(x, u);
      }
      const Mat sig = model.sigma(x);
      for (int k = 0; k < d; ++k, ++index) {
        if (index % 2 == 0) normals = counter_normal_pair(cfg.seed, key, index / 2);
        xi[k] = sign * (index % 2 == 0 ? normals.first : normals.second);
      }
      if (bins) {
        const Eigen::Index node = cfg.mem_grid->contains(x) ? cfg.mem_grid->nearest_node(x)
                                                             : cfg.mem_grid->size();
        ++hist[static_cast<std::size_t>(node)];
      }
      cost += r * h;
      if (aux) {
        const Vec w = (*aux)(x);
        const double w2 = w.squaredNorm();
        pen += 0.5 * w2 * h;
        if (cfg.likelihood_ratio) ll += -w.dot(xi) * sq - 0.5 * w2 * h;
        b.noalias() += sig.lazyProduct(w);
      }
      x += b * h + sig.lazyProduct(xi) * sq;
      t += h;
      if (!x.allFinite() || x.squaredNorm() > 1e300) {
        ens.valid[p] = 0;
        break;
      }
      if (R2 >= 0.0 && std::isnan(ens.hit_time[p]) && x.squaredNorm() <= R2) {
        ens.hit_time[p] = t;
        if (cfg.stop_at_hit) break;
      }
    }
    ens.terminal[p] = x;
    ens.cost_integral[p] = cost;
    ens.penalty_integral[p] = pen;
    ens.log_likelihood[p] = ll;
  };

  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t t) {
    const std::size_t lo = t * block;
    const std::size_t hi = std::min(n, lo + block);
    for (std::size_t p = lo; p < hi; ++p) run_path(p);
  });

  for (std::size_t p = 0; p < n; ++p) ens.excluded += ens.valid[p] ? 0 : 1;
  if (bins) {
    std::vector<std::int64_t> total(bins, 0);
    for (const auto& c : counts)
      for (std::size_t b = 0; b < bins; ++b) total[b] += c[b];
    std::int64_t sum = 0;
    for (const auto c : total) sum += c;
    ens.mem.assign(bins, 0.0);
    if (sum > 0)
      for (std::size_t b = 0; b < bins; ++b)
        ens.mem[b] = static_cast<double>(total[b]) / static_cast<double>(sum);
  }
  return ens;
}

namespace {

// (1/T) log mean exp(a) with delta-method standard error.
std::pair<double, double> log_mean_exp(const std::vector<double>& a, double T) {
  const double m = *std::max_element(a.begin(), a.end());
  double s1 = 0.0, s2 = 0.0;
  for (const double v : a) {
    const double e = std::exp(v - m);
    s1 += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(a.size());
  const double mean = s1 / n;
  const double var = a.size() > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {(m + std::log(mean)) / T, std::sqrt(var / n) / mean / T};
}

}  // namespace

RscEstimate estimate_rsc_cost(const PathEnsemble& ensemble, std::optional<double> truncation) {
  std::vector<double> a;
  std::vector<double> a_trunc;
  a.reserve(ensemble.size());
  for (std::size_t p = 0; p < ensemble.size(); ++p) {
    if (!ensemble.valid[p]) continue;
    const double v = ensemble.cost_integral[p] + ensemble.log_likelihood[p];
    a.push_back(v);
    if (truncation && ensemble.cost_integral[p] <= *truncation * ensemble.T) a_trunc.push_back(v);
  }
  if (a.empty()) throw ValidationError("estimate_rsc_cost: no valid paths");
  RscEstimate out;
  out.n_used = a.size();
  std::tie(out.estimate, out.std_error) = log_mean_exp(a, ensemble.T);
  if (truncation) {
    if (a_trunc.empty()) {
      out.tail_mass = 1.0;
    } else {
      const double full = log_mean_exp(a, 1.0).first + std::log(static_cast<double>(a.size()));
      const double part =
          log_mean_exp(a_trunc, 1.0).first + std::log(static_cast<double>(a_trunc.size()));
      out.truncated = (part - std::log(static_cast<double>(a.size()))) / ensemble.T;
      out.tail_mass = -std::expm1(part - full);
    }
  }
  return out;
}

RscEstimate importance_sampled_cost(const DiffusionModel& model, const Controller& controller,
                                    const Grid& grid, const Eigenpair& pair,
                                    const SimulationConfig& cfg, ImportanceOptions options) {
  if (pair.vector.size() != grid.size())
    throw ValidationError("importance_sampled_cost: eigenvector does not match grid");
  const AuxField omega = interpolate_field(grid, value_gradient_field(model, grid, pair.vector));
  SimulationConfig c = cfg;
  c.likelihood_ratio = true;
  PathEnsemble ens = simulate(model, controller, &omega, c);

  std::size_t clipped = 0;
  if (options.terminal_correction) {
    const NodeVector log_psi = pair.vector.array().log().matrix();
    bool clip0 = false;
    const double start = interpolate(grid, log_psi, cfg.x0, &clip0);
    for (std::size_t p = 0; p < ens.size(); ++p) {
      if (!ens.valid[p]) continue;
      bool clip = false;
      ens.log_likelihood[p] += interpolate(grid, log_psi, ens.terminal[p], &clip) - start;
      clipped += clip ? 1 : 0;
    }
  }
  RscEstimate out = estimate_rsc_cost(ens);
  out.clipped = clipped;
  return out;
}

std::vector<RepresentationPoint> check_stochastic_representation(
    const DiffusionModel& model, const Controller& controller, const Grid& grid,
    const NodeVector& V, double Lambda, double R, const std::vector<Vec>& test_points,
    SimulationConfig cfg, RepSampling sampling) {
  if (!(R > 0.0)) throw ValidationError("rep-check: R must be > 0");
  if (V.size() != grid.size()) throw ValidationError("rep-check: V does not match grid");
  cfg.hit_radius = R;
  cfg.stop_at_hit = true;
  cfg.likelihood_ratio = sampling == RepSampling::ground;
  cfg.mem_grid.reset();
  std::optional<AuxField> omega;
  if (sampling == RepSampling::ground) omega = interpolate_field(grid, value_gradient_field(model, grid, V));

  const std::uint64_t base_seed = cfg.seed;
  std::vector<RepresentationPoint> out;
  for (std::size_t t = 0; t < test_points.size(); ++t) {
    const Vec& x = test_points[t];
    if (x.norm() < R * (1.0 - 1e-12))
      throw ValidationError("rep-check: test points must lie outside the open radius-R ball");
    cfg.x0 = x;
    cfg.seed = splitmix64(base_seed + t);
    const PathEnsemble ens = simulate(model, controller, omega ? &*omega : nullptr, cfg);
    const double vx = interpolate(grid, V, x);
    std::vector<double> vals;
    std::size_t valid = 0;
    for (std::size_t p = 0; p < ens.size(); ++p) {
      if (!ens.valid[p]) continue;
      ++valid;
      if (std::isnan(ens.hit_time[p])) continue;
      const double tau = ens.hit_time[p];
      vals.push_back(std::exp(ens.cost_integral[p] - Lambda * tau + ens.log_likelihood[p]) *
                     interpolate(grid, V, ens.terminal[p]) / vx);
    }
    RepresentationPoint rp;
    rp.x = x;
    rp.hit_fraction = valid ? static_cast<double>(vals.size()) / static_cast<double>(valid) : 0.0;
    rp.inconclusive = rp.hit_fraction < 0.99;
    if (!vals.empty()) {
      double s1 = 0.0, s2 = 0.0;
      for (const double v : vals) {
        s1 += v;
        s2 += v * v;
      }
      const double n = static_cast<double>(vals.size());
      rp.ratio = s1 / n;
      rp.std_error = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * rp.ratio * rp.ratio) / (n - 1)) / n) : 0.0;
    }
    out.push_back(rp);
  }
  return out;
}

MemReport mem_tightness_report(const PathEnsemble& ensemble, const std::vector<double>& shell_radii) {
  if (!ensemble.mem_grid || ensemble.mem.empty())
    throw ValidationError("mem_tightness_report: ensemble has no occupation histogram");
  if (!std::is_sorted(shell_radii.begin(), shell_radii.end()) || shell_radii.empty())
    throw ValidationError("mem_tightness_report: shell radii must be increasing");
  const Grid& g = *ensemble.mem_grid;
  MemReport rep;
  rep.radii = shell_radii;
  rep.mass_beyond.assign(shell_radii.size(), 0.0);
  rep.shell_mass.assign(shell_radii.size() + 1, 0.0);
  const double outside = ensemble.mem.back();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double m = ensemble.mem[static_cast<std::size_t>(i)];
    if (m == 0.0) continue;
    const double rad = g.coord(i).norm();
    const auto k = static_cast<std::size_t>(
        std::upper_bound(shell_radii.begin(), shell_radii.end(), rad) - shell_radii.begin());
    rep.shell_mass[k] += m;
    for (std::size_t j = 0; j < shell_radii.size(); ++j)
      if (rad > shell_radii[j]) rep.mass_beyond[j] += m;
  }
  rep.shell_mass.back() += outside;
  for (auto& m : rep.mass_beyond) m += outside;
  const auto mode = static_cast<std::size_t>(
      std::max_element(rep.shell_mass.begin(), rep.shell_mass.end()) - rep.shell_mass.begin());
  rep.tight = true;
  for (std::size_t k = mode + 1; k < rep.shell_mass.size(); ++k)
    rep.tight = rep.tight && rep.shell_mass[k] <= rep.shell_mass[k - 1] + 1e-12;
  return rep;
}

}  // namespace ersc

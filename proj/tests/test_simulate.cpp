#include "ersc/simulate.hpp"
#include "ersc/hjb.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

using namespace ersc;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// b = 0, Sigma = I, cost r.
DiffusionModel brownian(int dim, double r = 0.0) {
  DiffusionModel m;
  m.dim = dim;
  m.drift = [dim](const Vec&, const Vec&) { return Vec(Vec::Zero(dim)); };
  m.sigma = [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); };
  m.cost = [r](const Vec&, const Vec&) { return r; };
  m.controls.points = {v1(0.0)};
  return m;
}

DiffusionModel ou() { return builtin_ou_lq(-1.0, 1.0, 0.75, 0.0, 0.0, 1); }

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("counter-based normals") {
  const auto a = counter_normal_pair(5, 7, 9);
  const auto b = counter_normal_pair(5, 7, 9);
  CHECK(a == b);
  CHECK(counter_normal(5, 7, 18) == a.first);
  CHECK(counter_normal(5, 7, 19) == a.second);
  CHECK(counter_normal_pair(6, 7, 9) != a);
  CHECK(counter_normal_pair(5, 8, 9) != a);
  // Moments over many keys.
  double s1 = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = counter_normal(1, 0, static_cast<std::uint64_t>(i));
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("two Euler steps of a Brownian motion") {
  SimulationConfig cfg;
  cfg.dt = 0.5;
  cfg.T = 1.0;
  cfg.n_paths = 1;
  cfg.seed = 99;
  cfg.x0 = v1(0.3);
  const auto ens = simulate(brownian(1), Controller::constant(0), nullptr, cfg);
  const double expect = 0.3 + std::sqrt(0.5) * (counter_normal(99, 0, 0) + counter_normal(99, 0, 1));
  CHECK(ens.terminal[0][0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("constant auxiliary drift shifts the mean") {
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 1.0;
  cfg.n_paths = 4000;
  cfg.x0 = v2(1.0, -1.0);
  const Vec c = v2(0.7, -0.4);
  const AuxField aux = constant_aux(c);
  const auto ens = simulate(brownian(2), Controller::constant(0), &aux, cfg);
  for (int k = 0; k < 2; ++k) {
    double s1 = 0, s2 = 0;
    for (const auto& z : ens.terminal) {
      const double d = z[k] - cfg.x0[k];
      s1 += d;
      s2 += d * d;
    }
    const double n = ens.size(), mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - c[k] * cfg.T) <= 3.0 * se);
  }
  for (double pen : ens.penalty_integral) CHECK(pen == doctest::Approx(0.5 * c.squaredNorm()));
}

TEST_CASE("antithetic pairs mirror the noise") {
  SimulationConfig cfg;
  cfg.dt = 0.1;
  cfg.T = 1.0;
  cfg.n_paths = 6;
  cfg.antithetic = true;
  cfg.x0 = v1(0.0);
  const auto ens = simulate(brownian(1), Controller::constant(0), nullptr, cfg);
  for (std::size_t p = 0; p < 6; p += 2) CHECK(ens.terminal[p][0] == doctest::Approx(-ens.terminal[p + 1][0]));
  cfg.n_paths = 5;
  CHECK_THROWS_AS(simulate(brownian(1), Controller::constant(0), nullptr, cfg), ValidationError);
}

TEST_CASE("configuration validation") {
  SimulationConfig cfg;
  cfg.x0 = v1(0.0);
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(1), ValidationError);
  cfg.dt = 2.0;
  cfg.T = 1.0;
  CHECK_THROWS_AS(cfg.validate(1), ValidationError);
  cfg.dt = 0.1;
  CHECK_NOTHROW(cfg.validate(1));
  CHECK_THROWS_AS(cfg.validate(2), ValidationError);
  cfg.n_paths = 0;
  CHECK_THROWS_AS(cfg.validate(1), ValidationError);
  cfg.n_paths = 1;
  cfg.T = 1.05;
  CHECK(cfg.steps() == 11);
}

TEST_CASE("seed reproducibility and worker independence") {
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 2.0;
  cfg.n_paths = 200;
  cfg.seed = 4;
  cfg.x0 = v1(1.0);
  cfg.mem_grid = build_grid({4.0}, {41});
  const auto m = ou();
  const auto a = simulate(m, Controller::constant(0), nullptr, cfg);
  const auto b = simulate(m, Controller::constant(0), nullptr, cfg);
  CHECK(a.digest() == b.digest());
  CHECK(a.mem == b.mem);
  cfg.workers = 3;
  const auto c = simulate(m, Controller::constant(0), nullptr, cfg);
  CHECK(a.digest() == c.digest());
  CHECK(a.mem == c.mem);
  cfg.workers = 1;
  cfg.seed = 5;
  CHECK(simulate(m, Controller::constant(0), nullptr, cfg).digest() != a.digest());
  CHECK(std::accumulate(a.mem.begin(), a.mem.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("constant cost is recovered exactly") {
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 1.0;
  cfg.n_paths = 50;
  cfg.x0 = v1(0.0);
  const auto ens = simulate(brownian(1, 0.37), Controller::constant(0), nullptr, cfg);
  const auto est = estimate_rsc_cost(ens);
  CHECK(est.estimate == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(est.std_error <= 1e-12);
}

TEST_CASE("estimator is symmetric in the paths") {
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 2.0;
  cfg.n_paths = 300;
  cfg.x0 = v1(0.0);
  auto ens = simulate(ou(), Controller::constant(0), nullptr, cfg);
  const auto a = estimate_rsc_cost(ens);
  std::vector<std::size_t> perm(ens.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  PathEnsemble shuffled = ens;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.cost_integral[i] = ens.cost_integral[perm[i]];
    shuffled.log_likelihood[i] = ens.log_likelihood[perm[i]];
    shuffled.valid[i] = ens.valid[perm[i]];
  }
  const auto b = estimate_rsc_cost(shuffled);
  CHECK(b.estimate == doctest::Approx(a.estimate).epsilon(1e-12));
  CHECK(b.std_error == doctest::Approx(a.std_error).epsilon(1e-9));
}

TEST_CASE("truncated estimate increases toward the full one") {
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 4.0;
  cfg.n_paths = 2000;
  cfg.x0 = v1(0.0);
  const auto ens = simulate(ou(), Controller::constant(0), nullptr, cfg);
  const auto full = estimate_rsc_cost(ens);
  std::vector<double> per_time;
  for (double c : ens.cost_integral) per_time.push_back(c / cfg.T);
  std::sort(per_time.begin(), per_time.end());
  const double q999 = per_time[static_cast<std::size_t>(0.999 * (per_time.size() - 1))];
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double L : {0.5 * q999, 0.75 * q999, q999, 1.5 * q999}) {
    const auto t = estimate_rsc_cost(ens, L);
    REQUIRE(t.truncated.has_value());
    const double gap = full.estimate - *t.truncated;
    CHECK(gap >= -1e-12);
    CHECK(gap <= prev_gap + 1e-12);
    CHECK(t.tail_mass >= 0.0);
    CHECK(t.tail_mass <= 1.0);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 1e-12);
}

TEST_CASE("blow-up paths are excluded") {
  DiffusionModel m = brownian(1);
  m.drift = [](const Vec& x, const Vec&) { return Vec(v1(x[0] * x[0] * x[0])); };
  SimulationConfig cfg;
  cfg.dt = 0.1;
  cfg.T = 5.0;
  cfg.n_paths = 10;
  cfg.x0 = v1(10.0);
  const auto ens = simulate(m, Controller::constant(0), nullptr, cfg);
  CHECK(ens.excluded == 10);
  CHECK_THROWS_AS(estimate_rsc_cost(ens), ValidationError);
}

TEST_CASE("zero cost importance sampling is exact") {
  const auto m = builtin_ou_lq(-1.0, 1.0, 0.0, 0.0, 0.0, 1);
  const Grid g = build_grid({6.0}, {121});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(121, 0));
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 2.0;
  cfg.n_paths = 100;
  cfg.x0 = v1(0.5);
  const auto est = importance_sampled_cost(m, Controller::constant(0), g, pair, cfg);
  CHECK(std::abs(est.estimate) <= 1e-9);
  CHECK(est.std_error <= 1e-9);
}

TEST_CASE("importance sampling with the exact eigenpair") {
  const auto m = ou();
  const Grid g = build_grid({6.0}, {241});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
  SimulationConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 8.0;
  cfg.n_paths = 1000;
  cfg.x0 = v1(0.0);
  const auto est = importance_sampled_cost(m, Controller::constant(0), g, pair, cfg);
  CHECK(est.std_error <= 1e-3);
  CHECK(std::abs(est.estimate - 0.25) <= 1e-2);
  CHECK(est.clipped == 0);
}

TEST_CASE("plain and importance-sampled finite-horizon costs agree") {
  const auto m = ou();
  const Grid g = build_grid({6.0}, {241});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
  SimulationConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 2.0;
  cfg.n_paths = 2000;
  cfg.x0 = v1(0.0);
  const auto plain = estimate_rsc_cost(simulate(m, Controller::constant(0), nullptr, cfg));
  cfg.seed = 2;
  const auto is = importance_sampled_cost(m, Controller::constant(0), g, pair, cfg, {false});
  const double se = std::hypot(plain.std_error, is.std_error);
  CHECK(std::abs(plain.estimate - is.estimate) <= 3.0 * se);
  CHECK(is.std_error < plain.std_error);
}

TEST_CASE("importance-sampled estimate converges at first order in dt") {
  const auto m = ou();
  const Grid g = build_grid({6.0}, {241});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
  SimulationConfig cfg;
  cfg.T = 4.0;
  cfg.n_paths = 500;
  cfg.x0 = v1(0.0);
  std::vector<RscEstimate> e;
  for (double dt : {8e-3, 4e-3, 2e-3}) {
    cfg.dt = dt;
    e.push_back(importance_sampled_cost(m, Controller::constant(0), g, pair, cfg));
  }
  const double d1 = std::abs(e[0].estimate - e[1].estimate);
  const double d2 = std::abs(e[1].estimate - e[2].estimate);
  const double noise = 3.0 * (e[0].std_error + 2.0 * e[1].std_error + e[2].std_error);
  CHECK(d2 <= d1 + noise);
}

TEST_CASE("ground diffusion has the predicted stationary variance") {
  const auto m = ou();
  const Grid g = build_grid({6.0}, {241});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
  const AuxField omega = interpolate_field(g, value_gradient_field(m, g, pair.vector));
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 12.0;
  cfg.n_paths = 2000;
  cfg.x0 = v1(0.0);
  const auto ens = simulate(m, Controller::constant(0), &omega, cfg);
  double s2 = 0;
  for (const auto& z : ens.terminal) s2 += z[0] * z[0];
  const double var = s2 / ens.size();
  // sigma^2 / (2 (|a| - gamma sigma^2)) with gamma = 1/2.
  CHECK(std::abs(var - 1.0) <= 4.0 * std::sqrt(2.0 / ens.size()) + 0.01);
}

TEST_CASE("stochastic representation") {
  const auto m = ou();
  const Grid g = build_grid({6.0}, {241});
  const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
  SimulationConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 20.0;
  cfg.n_paths = 400;
  SUBCASE("on the sphere the ratio is one") {
    const auto rp = check_stochastic_representation(m, Controller::constant(0), g, pair.vector,
                                                    pair.value, 1.0, {v1(1.0), v1(-1.0)}, cfg);
    for (const auto& p : rp) {
      CHECK(p.ratio == 1.0);
      CHECK(p.hit_fraction == 1.0);
      CHECK_FALSE(p.inconclusive);
    }
  }
  SUBCASE("a larger exponent discounts every path") {
    const auto a = check_stochastic_representation(m, Controller::constant(0), g, pair.vector,
                                                   pair.value, 1.0, {v1(2.0)}, cfg);
    const auto b = check_stochastic_representation(m, Controller::constant(0), g, pair.vector,
                                                   pair.value + 0.1, 1.0, {v1(2.0)}, cfg);
    CHECK(b[0].ratio < a[0].ratio);
    CHECK(b[0].ratio < 1.0);
    CHECK(std::abs(a[0].ratio - 1.0) <= 0.05);
    CHECK(a[0].std_error <= 0.01);
  }
  SUBCASE("plain sampling agrees within its error bar") {
    // Heavy-tailed weights: the error bar, not a fixed band, is the honest scale.
    const auto a = check_stochastic_representation(m, Controller::constant(0), g, pair.vector, pair.value,
                                                   1.0, {v1(2.0)}, cfg, RepSampling::plain);
    CHECK(std::abs(a[0].ratio - 1.0) <= 3.0 * a[0].std_error);
    CHECK(a[0].hit_fraction >= 0.99);
  }
  CHECK_THROWS_AS(check_stochastic_representation(m, Controller::constant(0), g, pair.vector,
                                                  pair.value, 1.0, {v1(0.5)}, cfg),
                  ValidationError);
}

TEST_CASE("occupation measure tightness") {
  const auto m = ou();
  SimulationConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 10.0;
  cfg.n_paths = 200;
  cfg.x0 = v1(0.0);
  cfg.mem_grid = build_grid({6.0}, {121});
  SUBCASE("stationary OU has light tails") {
    const auto ens = simulate(m, Controller::constant(0), nullptr, cfg);
    const double sd = std::sqrt(0.5);
    const auto rep = mem_tightness_report(ens, {sd, 2 * sd, 3 * sd, 4 * sd});
    CHECK(rep.mass_beyond.back() <= 1e-3);
    CHECK(rep.tight);
    CHECK(std::accumulate(rep.shell_mass.begin(), rep.shell_mass.end(), 0.0) == doctest::Approx(1.0));
    for (std::size_t k = 1; k < rep.mass_beyond.size(); ++k) CHECK(rep.mass_beyond[k] <= rep.mass_beyond[k - 1]);
  }
  SUBCASE("nearly deterministic drift keeps all mass inside") {
    auto quiet = m;
    quiet.sigma = [](const Vec&) { return Mat(Mat::Constant(1, 1, 1e-6)); };
    cfg.x0 = v1(0.5);
    const auto ens = simulate(quiet, Controller::constant(0), nullptr, cfg);
    const auto rep = mem_tightness_report(ens, {1.0, 2.0, 3.0});
    CHECK(rep.shell_mass[0] == doctest::Approx(1.0));
    CHECK(rep.tight);
  }
  SUBCASE("ground diffusion is tight") {
    const Grid g = build_grid({6.0}, {241});
    const auto pair = policy_value(m, g, MarkovPolicy::constant(241, 0));
    const AuxField omega = interpolate_field(g, value_gradient_field(m, g, pair.vector));
    const auto ens = simulate(m, Controller::constant(0), &omega, cfg);
    CHECK(mem_tightness_report(ens, {1.0, 2.0, 3.0, 4.0}).tight);
  }
  const auto plain = simulate(m, Controller::constant(0), nullptr, [&] {
    auto c = cfg;
    c.mem_grid.reset();
    c.n_paths = 2;
    return c;
  }());
  CHECK_THROWS_AS(mem_tightness_report(plain, {1.0}), ValidationError);
}

TEST_CASE("interpolation and controllers") {
  const Grid g = build_grid({2.0, 1.0}, {5, 3});
  NodeVector f(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) f[i] = 1.0 + 2.0 * g.coord(i)[0] - 3.0 * g.coord(i)[1];
  bool clipped = true;
  CHECK(interpolate(g, f, v2(0.3, -0.7), &clipped) == doctest::Approx(1.0 + 0.6 + 2.1));
  CHECK_FALSE(clipped);
  CHECK(interpolate(g, f, v2(5.0, 0.0), &clipped) == doctest::Approx(1.0 + 4.0));
  CHECK(clipped);

  std::vector<int> ctl(static_cast<std::size_t>(g.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) ctl[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
  const auto c = Controller::from_policy(g, MarkovPolicy::precise(ctl));
  for (Eigen::Index i = 0; i < g.size(); ++i)
    CHECK(c.mixture(g.coord(i)).front().first == static_cast<int>(i % 2));
  CHECK(Controller::from_policy(g, MarkovPolicy::constant(15, 1)).mixture(v2(9, 9)).front().first == 1);
  CHECK_THROWS_AS(Controller::from_policy(g, MarkovPolicy::constant(3, 0)), ValidationError);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(101);
  parallel_for(101, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
}

}  // TEST_SUITE

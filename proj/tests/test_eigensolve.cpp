#include "ersc/eigensolve.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

using namespace ersc;

namespace {

SparseRowMatrix two_state() {
  SparseRowMatrix q(2, 2);
  q.insert(0, 0) = -1;
  q.insert(0, 1) = 1;
  q.insert(1, 0) = 1;
  q.insert(1, 1) = -1;
  q.makeCompressed();
  return q;
}

// Random irreducible generator on a ring plus random chords.
SparseRowMatrix random_generator(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, (i + 1) % n) += unif(gen);
    d(i, (i + n - 1) % n) += unif(gen);
    const int j = pick(gen);
    if (j != i) d(i, j) += unif(gen);
  }
  for (int i = 0; i < n; ++i) d(i, i) = -(d.row(i).sum() - d(i, i));
  return d.sparseView();
}

// Largest real eigenvalue by dense decomposition.
double dense_perron(const SparseRowMatrix& q, const NodeVector& r) {
  Eigen::MatrixXd a = Eigen::MatrixXd(q);
  a.diagonal() += r;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

}  // namespace

TEST_SUITE("eigensolve") {

TEST_CASE("two-state chain with zero cost") {
  const auto p = principal_eigenpair(two_state(), NodeVector::Zero(2));
  CHECK(std::abs(p.value) < 1e-12);
  CHECK(p.vector[0] == doctest::Approx(1.0));
  CHECK(p.vector[1] == doctest::Approx(1.0));
}

TEST_CASE("two-state chain with cost on one state") {
  NodeVector r(2);
  r << 0, 1;
  const auto p = principal_eigenpair(two_state(), r);
  const double exact = (-1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(std::abs(p.value - exact) <= 1e-10);
  CHECK(p.cw_upper - p.cw_lower <= 1e-10);
  CHECK(p.vector[0] == 1.0);
  CHECK(p.vector[1] == doctest::Approx(1.0 + exact));
}

TEST_CASE("random chains match the dense spectrum") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> cost(0.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 15;
    const auto q = random_generator(n, gen);
    NodeVector r(n);
    for (int i = 0; i < n; ++i) r[i] = cost(gen);
    const auto p = principal_eigenpair(q, r, 0, {1e-12, 1000, std::nullopt, DriftScheme::hybrid});
    CHECK(p.value == doctest::Approx(dense_perron(q, r)).epsilon(1e-10));
    CHECK(p.vector.minCoeff() > 0.0);
    // Perron equation residual.
    Eigen::MatrixXd a = Eigen::MatrixXd(q);
    a.diagonal() += r;
    CHECK((a * p.vector - p.value * p.vector).cwiseAbs().maxCoeff() <= 1e-9 * p.vector.maxCoeff());
  }
}

TEST_CASE("constant shift and monotonicity in the cost") {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> cost(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8;
    const auto q = random_generator(n, gen);
    NodeVector r(n);
    for (int i = 0; i < n; ++i) r[i] = cost(gen);
    const double base = principal_eigenpair(q, r).value;
    const double shifted = principal_eigenpair(q, (r.array() + 0.7).matrix()).value;
    CHECK(shifted == doctest::Approx(base + 0.7).epsilon(1e-10));
    NodeVector bigger = r;
    bigger[trial % n] += 0.5;
    CHECK(principal_eigenpair(q, bigger).value >= base - 1e-12);
  }
}

TEST_CASE("reducible and malformed input") {
  SparseRowMatrix q(2, 2);
  q.insert(0, 0) = -1;
  q.insert(0, 1) = 1;
  q.insert(1, 1) = 0;
  CHECK_THROWS_AS(principal_eigenpair(q, NodeVector::Zero(2)), ReducibleError);
  CHECK_THROWS_AS(principal_eigenpair(two_state(), NodeVector::Zero(3)), ValidationError);
  NodeVector bad(2);
  bad << 0, std::nan("");
  CHECK_THROWS_AS(principal_eigenpair(two_state(), bad), ValidationError);
  EigenOptions opt;
  opt.initial = NodeVector::Constant(2, -1.0);
  CHECK_THROWS_AS(principal_eigenpair(two_state(), NodeVector::Zero(2), 0, opt), ValidationError);
}

TEST_CASE("warm start converges to the same pair") {
  NodeVector r(2);
  r << 0, 1;
  EigenOptions opt;
  opt.initial = NodeVector::Constant(2, 3.0);
  const auto p = principal_eigenpair(two_state(), r, 1, opt);
  CHECK(p.value == doctest::Approx((-1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-10));
  CHECK(p.vector[1] == 1.0);
}

TEST_CASE("Collatz-Wielandt bounds bracket the eigenvalue") {
  NodeVector r(2);
  r << 0, 1;
  const auto [lo, hi] = collatz_wielandt(two_state(), r, NodeVector::Constant(2, 1.0));
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("uncontrolled OU benchmark") {
  const auto m = builtin_ou_lq(-1.0, 1.0, 0.75, 0.0, 0.0, 1);
  const Grid g = build_grid({6.0}, {241});
  const auto p = policy_value(m, g, MarkovPolicy::constant(241, 0));
  CHECK(std::abs(p.value - 0.25) <= 2e-3);
  CHECK(p.vector.minCoeff() > 0.0);
  // Shape exp(x^2/4) on the inner region.
  for (int i = 60; i <= 180; i += 20) {
    const double x = g.coord(i)[0];
    CHECK(std::log(p.vector[i]) == doctest::Approx(0.25 * x * x).epsilon(0.02));
  }
}

TEST_CASE("zero cost and scaled cost") {
  const auto zero = builtin_ou_lq(-1.0, 1.0, 0.0, 0.0, 0.0, 1);
  const Grid g = build_grid({4.0}, {81});
  const auto pol = MarkovPolicy::constant(81, 0);
  const auto p0 = policy_value(zero, g, pol);
  CHECK(std::abs(p0.value) < 1e-12);
  CHECK((p0.vector.array() - 1.0).abs().maxCoeff() < 1e-9);

  const auto m = builtin_ou_lq(-1.0, 1.0, 0.75, 0.0, 0.0, 1);
  const auto q = assemble_policy_generator(m, g, pol);
  const NodeVector r = policy_cost(m, g, pol);
  CHECK(principal_eigenpair(q, r, g.origin_node()).value ==
        doctest::Approx(policy_value(m, g, pol).value).epsilon(1e-12));
  const double kappa = 0.3;
  const auto mk = with_cost(m, [&](const Vec& x, const Vec& u) { return kappa * m.cost(x, u); });
  CHECK(policy_value(mk, g, pol).value ==
        doctest::Approx(principal_eigenpair(q, kappa * r, g.origin_node()).value).epsilon(1e-12));
}

TEST_CASE("Foster-Lyapunov certificate") {
  SUBCASE("scale zero") {
    const auto m = builtin_ou_lq(-1.0, 1.0, 0.75, 0.0, 0.0, 1);
    const Grid g = build_grid({4.0}, {81});
    const CostFn h = [](const Vec& x, const Vec&) { return 1.0 + x.squaredNorm(); };
    const auto c = foster_lyapunov_certificate(m, g, MarkovPolicy::constant(81, 0), h, 0.0, 1.0);
    CHECK(std::abs(c.pair.value) < 1e-12);
    CHECK((c.pair.vector.array() - 1.0).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("inf-compact h on OU") {
    const auto m = builtin_ou_lq(-1.0, 1.0, 0.75, 0.0, 0.0, 1);
    const Grid g = build_grid({6.0}, {121});
    const CostFn h = [](const Vec& x, const Vec&) { return 1.0 + x.squaredNorm(); };
    const double eps0 = 0.0625;
    const auto c = foster_lyapunov_certificate(m, g, MarkovPolicy::constant(121, 0), h, eps0, 2.0);
    CHECK(std::isfinite(c.pair.value));
    CHECK(c.pair.vector.minCoeff() > 0.0);
    CHECK(c.drift_margin > 0.0);
  }
  SUBCASE("two-state chain with constant h") {
    DiffusionModel m;
    m.dim = 1;
    m.drift = [](const Vec&, const Vec&) { return v1(0.0); };
    m.sigma = [](const Vec&) { return Mat(Mat::Identity(1, 1)); };
    m.cost = [](const Vec&, const Vec&) { return 0.0; };
    m.controls.points = {v1(0.0)};
    const Grid g = build_grid({1.0}, {3});
    const CostFn h = [](const Vec&, const Vec&) { return 1.0; };
    const auto c = foster_lyapunov_certificate(m, g, MarkovPolicy::constant(3, 0), h, 0.0625, 0.0);
    CHECK(c.pair.value == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK((c.pair.vector.array() - 1.0).abs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(foster_lyapunov_certificate(builtin_ou_lq(-1, 1, 0, 0, 0, 1), build_grid({1.0}, {3}),
                                              MarkovPolicy::constant(3, 0),
                                              [](const Vec&, const Vec&) { return 1.0; }, -1.0, 0.0),
                  ValidationError);
}

TEST_CASE("eigenvector CSV") {
  const Grid g = build_grid({1.0}, {3});
  NodeVector psi(3);
  psi << 2, 1, 0.5;
  std::ostringstream os;
  write_eigenvector_csv(os, g, psi);
  CHECK(os.str() == "x0,psi\n-1,2\n0,1\n1,0.5\n");
}

}  // TEST_SUITE

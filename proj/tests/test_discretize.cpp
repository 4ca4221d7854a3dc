#include "ersc/discretize.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace ersc;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

// 1D model with constant drift b and unit noise.
DiffusionModel const_drift_model(double b) {
  DiffusionModel m;
  m.name = "const";
  m.dim = 1;
  m.drift = [b](const Vec&, const Vec& u) { return Vec(v1(b + u[0])); };
  m.sigma = [](const Vec&) { return Mat(Mat::Identity(1, 1)); };
  m.cost = [](const Vec&, const Vec&) { return 0.0; };
  m.controls.points = {v1(0.0)};
  return m;
}

double rate(const SparseRowMatrix& q, Eigen::Index i, Eigen::Index j) { return q.coeff(i, j); }

}  // namespace

TEST_SUITE("discretize") {

TEST_CASE("three-node grid") {
  const Grid g = build_grid({1.0}, {3});
  CHECK(g.size() == 3);
  CHECK(g.spacing(0) == doctest::Approx(1.0));
  CHECK(g.origin_node() == 1);
  CHECK(g.coord(0)[0] == doctest::Approx(-1.0));
  CHECK(g.coord(1)[0] == doctest::Approx(0.0));
  CHECK(g.coord(2)[0] == doctest::Approx(1.0));
}

TEST_CASE("grid spacing arithmetic") {
  const Grid g = build_grid({6.0}, {241});
  CHECK(g.spacing(0) == doctest::Approx(0.05));
  CHECK(std::abs(g.coord(g.origin_node())[0]) <= g.spacing(0));
  const Grid g2 = build_grid({1.0, 2.0}, {3, 5});
  CHECK(g2.size() == 15);
  CHECK(g2.spacing(0) == doctest::Approx(1.0));
  CHECK(g2.spacing(1) == doctest::Approx(1.0));
  CHECK(g2.coord(g2.origin_node()).norm() < 1e-12);
}

TEST_CASE("row-major indexing, shifts and nearest node") {
  const Grid g = build_grid({1.0, 2.0}, {3, 5});
  CHECK(g.stride(1) == 1);
  CHECK(g.stride(0) == 5);
  for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(g.nearest_node(g.coord(i)) == i);
  CHECK(g.shift(0, 0, -1) == -1);
  CHECK(g.shift(0, 1, 1) == 1);
  CHECK(g.shift(0, 0, 1) == 5);
  CHECK(g.on_boundary(0));
  CHECK_FALSE(g.on_boundary(g.origin_node()));
  Vec far(2);
  far << 10.0, -10.0;
  CHECK_FALSE(g.contains(far));
  CHECK(g.nearest_node(far) == 10);
}

TEST_CASE("build_grid validation") {
  CHECK_THROWS_AS(build_grid({1.0}, {2}), ValidationError);
  CHECK_THROWS_AS(build_grid({0.0}, {3}), ValidationError);
  CHECK_THROWS_AS(build_grid({1.0, 1.0}, {3}), ValidationError);
  CHECK_THROWS_AS(build_grid({1.0, 1.0}, {101, 101}, 10000), ValidationError);
  CHECK_NOTHROW(build_grid({1.0, 1.0}, {100, 100}, 10000));
}

TEST_CASE("pure diffusion stencil") {
  const auto m = const_drift_model(0.0);
  const Grid g = build_grid({1.0}, {11});
  const double h = g.spacing(0);
  for (auto scheme : {DriftScheme::upwind, DriftScheme::hybrid}) {
    const auto q = assemble_generator(m, g, v1(0.0), scheme).rates;
    CHECK(rate(q, 5, 4) == doctest::Approx(0.5 / (h * h)));
    CHECK(rate(q, 5, 6) == doctest::Approx(0.5 / (h * h)));
    CHECK(rate(q, 5, 5) == doctest::Approx(-1.0 / (h * h)));
  }
}

TEST_CASE("upwind stencil for positive drift") {
  const auto m = const_drift_model(1.0);
  const Grid g = build_grid({1.0}, {11});
  const double h = g.spacing(0);
  const auto q = assemble_generator(m, g, v1(0.0), DriftScheme::upwind).rates;
  CHECK(rate(q, 5, 6) == doctest::Approx(0.5 / (h * h) + 1.0 / h));
  CHECK(rate(q, 5, 4) == doctest::Approx(0.5 / (h * h)));
  CHECK(max_abs_row_sum(q) <= 1e-12);
}

TEST_CASE("hybrid stencil is central while both rates stay positive") {
  const auto m = const_drift_model(1.0);
  const Grid g = build_grid({1.0}, {11});
  const double h = g.spacing(0);
  const auto q = assemble_generator(m, g, v1(0.0), DriftScheme::hybrid).rates;
  CHECK(rate(q, 5, 6) == doctest::Approx(0.5 / (h * h) + 0.5 / h));
  CHECK(rate(q, 5, 4) == doctest::Approx(0.5 / (h * h) - 0.5 / h));
  // Strong drift: falls back to upwind.
  const auto strong = const_drift_model(100.0);
  const auto qs = assemble_generator(strong, g, v1(0.0), DriftScheme::hybrid).rates;
  CHECK(rate(qs, 5, 4) == doctest::Approx(0.5 / (h * h)));
  CHECK(rate(qs, 5, 6) == doctest::Approx(0.5 / (h * h) + 100.0 / h));
}

TEST_CASE("boundary rows drop the outflow") {
  const auto m = const_drift_model(0.0);
  const Grid g = build_grid({1.0}, {5});
  const auto q = assemble_generator(m, g, v1(0.0)).rates;
  CHECK(q.row(0).nonZeros() == 2);
  CHECK(rate(q, 0, 1) > 0.0);
  CHECK(max_abs_row_sum(q) <= 1e-12);
}

TEST_CASE("conservative, sign-structured and irreducible on random models") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = unif(gen), c0 = unif(gen), s = 0.3 + std::abs(unif(gen));
    auto m = const_drift_model(0.0);
    m.drift = [a, c0](const Vec& x, const Vec& u) { return Vec(v1(a * x[0] + c0 + u[0])); };
    m.sigma = [s](const Vec& x) { return Mat(Mat::Constant(1, 1, s * (1.0 + 0.1 * x[0] * x[0]))); };
    m.controls.points = {v1(-1.0), v1(0.0), v1(1.0)};
    const Grid g = build_grid({3.0}, {31});
    for (std::size_t k = 0; k < m.controls.size(); ++k) {
      for (auto scheme : {DriftScheme::upwind, DriftScheme::hybrid}) {
        const auto q = assemble_generator(m, g, m.control(k), scheme).rates;
        CHECK(max_abs_row_sum(q) <= 1e-12);
        CHECK(min_off_diagonal(q) >= 0.0);
        CHECK(is_irreducible(q));
      }
    }
  }
}

TEST_CASE("2D with correlated noise keeps nonnegative rates") {
  DiffusionModel m;
  m.dim = 2;
  m.drift = [](const Vec& x, const Vec&) { return Vec(-x); };
  m.sigma = [](const Vec&) {
    Mat s(2, 2);
    s << 1.0, 0.0, 0.3, 1.0;
    return s;
  };
  m.cost = [](const Vec&, const Vec&) { return 0.0; };
  Vec u0(1);
  u0 << 0.0;
  m.controls.points = {u0};
  const Grid g = build_grid({2.0, 2.0}, {21, 21});
  const auto q = assemble_generator(m, g, u0).rates;
  CHECK(max_abs_row_sum(q) <= 1e-12);
  CHECK(min_off_diagonal(q) >= 0.0);
  CHECK(is_irreducible(q));
}

TEST_CASE("cross-term splitting failure names the node") {
  DiffusionModel m;
  m.dim = 2;
  m.drift = [](const Vec& x, const Vec&) { return Vec(-x); };
  m.sigma = [](const Vec&) {
    Mat s(2, 2);
    s << 1.0, 0.0, 3.0, 0.2;  // strongly correlated
    return s;
  };
  m.cost = [](const Vec&, const Vec&) { return 0.0; };
  Vec u0(1);
  u0 << 0.0;
  m.controls.points = {u0};
  const Grid g = build_grid({2.0, 2.0}, {21, 21});
  CHECK_THROWS_WITH_AS(assemble_generator(m, g, u0), doctest::Contains("node"), ValidationError);
}

TEST_CASE("policy generator rows") {
  auto m = const_drift_model(0.0);
  m.drift = [](const Vec& x, const Vec& u) { return Vec(v1(u[0] - 0.0 * x[0])); };
  m.controls.points = {v1(-3.0), v1(3.0)};
  const Grid g = build_grid({1.0}, {9});

  SUBCASE("constant policy matches the single-control generator") {
    const auto qp = assemble_policy_generator(m, g, MarkovPolicy::constant(9, 1)).rates;
    const auto qc = assemble_generator(m, g, m.control(1)).rates;
    CHECK((Eigen::MatrixXd(qp) - Eigen::MatrixXd(qc)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("relaxed policy averages rows") {
    MarkovPolicy mix;
    mix.assignment.assign(9, {{0, 0.5}, {1, 0.5}});
    const auto qr = Eigen::MatrixXd(assemble_policy_generator(m, g, mix).rates);
    const auto q0 = Eigen::MatrixXd(assemble_generator(m, g, m.control(0)).rates);
    const auto q1 = Eigen::MatrixXd(assemble_generator(m, g, m.control(1)).rates);
    CHECK((qr - 0.5 * (q0 + q1)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("policy flipping at the origin flips the upwind direction") {
    std::vector<int> c(9);
    for (int i = 0; i < 9; ++i) c[i] = g.coord(i)[0] < 0 ? 1 : 0;  // push toward 0
    const auto q = assemble_policy_generator(m, g, MarkovPolicy::precise(c), DriftScheme::upwind).rates;
    const double h = g.spacing(0), diff = 0.5 / (h * h);
    CHECK(rate(q, 2, 3) == doctest::Approx(diff + 3.0 / h));
    CHECK(rate(q, 2, 1) == doctest::Approx(diff));
    CHECK(rate(q, 6, 5) == doctest::Approx(diff + 3.0 / h));
    CHECK(rate(q, 6, 7) == doctest::Approx(diff));
  }
  SUBCASE("undefined nodes are rejected") {
    MarkovPolicy bad = MarkovPolicy::constant(8, 0);
    CHECK_THROWS_AS(assemble_policy_generator(m, g, bad), ValidationError);
    bad = MarkovPolicy::constant(9, 0);
    bad.assignment[4].clear();
    CHECK_THROWS_AS(assemble_policy_generator(m, g, bad), ValidationError);
    bad = MarkovPolicy::constant(9, 0);
    bad.assignment[4] = {{7, 1.0}};
    CHECK_THROWS_AS(assemble_policy_generator(m, g, bad), ValidationError);
  }
}

TEST_CASE("policy cost mixes linearly") {
  auto m = const_drift_model(0.0);
  m.controls.points = {v1(0.0), v1(2.0)};
  m.cost = [](const Vec& x, const Vec& u) { return x[0] * x[0] + u[0]; };
  const Grid g = build_grid({1.0}, {3});
  MarkovPolicy p;
  p.assignment = {{{0, 1.0}}, {{0, 0.25}, {1, 0.75}}, {{1, 1.0}}};
  const auto r = policy_cost(m, g, p);
  CHECK(r[0] == doctest::Approx(1.0));
  CHECK(r[1] == doctest::Approx(1.5));
  CHECK(r[2] == doctest::Approx(3.0));
}

TEST_CASE("reducibility detection") {
  SparseRowMatrix q(3, 3);
  q.insert(0, 0) = -1;
  q.insert(0, 1) = 1;
  q.insert(1, 1) = -1;
  q.insert(1, 0) = 1;
  q.insert(2, 2) = 0;
  CHECK_FALSE(is_irreducible(q));
  q.coeffRef(2, 0) = 1;
  q.coeffRef(2, 2) = -1;
  CHECK_FALSE(is_irreducible(q));  // 2 is not reachable
  q.coeffRef(1, 2) = 1;
  q.coeffRef(1, 1) = -2;
  CHECK(is_irreducible(q));
}

TEST_CASE("coordinate dump") {
  SparseRowMatrix q(2, 2);
  q.insert(0, 0) = -1.5;
  q.insert(0, 1) = 1.5;
  q.insert(1, 0) = 2;
  q.insert(1, 1) = -2;
  std::ostringstream os;
  write_coordinate(os, q);
  CHECK(os.str() == "row,col,value\n0,0,-1.5\n0,1,1.5\n1,0,2\n1,1,-2\n");
}

}  // TEST_SUITE

#include "ersc/eigensolve.hpp"

#include "ersc/csv.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace ersc {

std::pair<double, double> collatz_wielandt(const SparseRowMatrix& q, const NodeVector& r,
                                           const NodeVector& psi) {
  const NodeVector y = q * psi + r.cwiseProduct(psi);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    const double ratio = y[i] / psi[i];
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo, hi};
}

Eigenpair principal_eigenpair(const SparseRowMatrix& q, const NodeVector& r,
                              Eigen::Index origin_node, const EigenOptions& options) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n || r.size() != n) throw ValidationError("principal_eigenpair: size mismatch");
  if (n == 0) throw ValidationError("principal_eigenpair: empty matrix");
  if (origin_node < 0 || origin_node >= n)
    throw ValidationError("principal_eigenpair: origin node out of range");
  if (!r.allFinite()) throw ValidationError("principal_eigenpair: cost vector is not finite");
  if (!is_irreducible(q)) throw ReducibleError("principal_eigenpair: generator is reducible");

  NodeVector psi = options.initial ? *options.initial : NodeVector::Ones(n);
  if (psi.size() != n || !(psi.array() > 0.0).all())
    throw ValidationError("principal_eigenpair: initial vector must be positive");
  psi /= psi.maxCoeff();

  // M = -(Q + diag r) in column-major storage with an explicit diagonal; the
  // shift is applied by rewriting the stored diagonal values.
  Eigen::SparseMatrix<double> m(n, n);
  {
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    m = -Eigen::SparseMatrix<double>(q) - Eigen::SparseMatrix<double>(r.asDiagonal()) + 0.0 * eye;
    m.makeCompressed();
  }
  std::vector<double*> diag(static_cast<std::size_t>(n), nullptr);
  NodeVector base_diag(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, j); it; ++it) {
      if (it.row() == j) {
        diag[static_cast<std::size_t>(j)] = &it.valueRef();
        base_diag[j] = it.value();
      }
    }
  }

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(m);

  const double r_inf = r.cwiseAbs().maxCoeff();
  const double delta_max = std::max(1.0, 1e-2 * r_inf);
  // Residual ratios carry roundoff of order eps * (|Q| + |r|); a tighter
  // bracket is not attainable.
  const double q_inf = (-base_diag.array() - r.array()).abs().maxCoeff();
  const double tol = std::max(options.tol, 64.0 * std::numeric_limits<double>::epsilon() * (q_inf + r_inf));

  // Per-row roundoff of the ratios (Q psi + r psi)_i / psi_i, which grows where
  // psi_i is small against its neighbors.
  const auto ratio_floor = [&](const NodeVector& v) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mag = std::abs(r[i]) * v[i];
      for (SparseRowMatrix::InnerIterator e(q, i); e; ++e) mag += std::abs(e.value()) * v[e.col()];
      worst = std::max(worst, mag / v[i]);
    }
    return 16.0 * std::numeric_limits<double>::epsilon() * worst;
  };

  Eigenpair out;
  out.origin_node = origin_node;
  for (int it = 0; it <= options.max_iter; ++it) {
    const auto [lo, hi] = collatz_wielandt(q, r, psi);
    out.cw_lower = lo;
    out.cw_upper = hi;
    out.iterations = it;
    if (hi - lo <= std::max(tol, ratio_floor(psi))) {
      out.value = hi;
      out.vector = psi / psi[origin_node];
      return out;
    }
    if (it == options.max_iter) break;
    const double width = hi - lo;
    const double delta =
        std::clamp(width, std::max(1e-3 * tol, 1e-14 * (1.0 + std::abs(hi))), delta_max);
    const double shift = hi + delta;
    for (Eigen::Index j = 0; j < n; ++j) *diag[static_cast<std::size_t>(j)] = base_diag[j] + shift;
    lu.factorize(m);
    if (lu.info() != Eigen::Success)
      throw ConvergenceError("principal_eigenpair: factorization failed: " + lu.lastErrorMessage());
    NodeVector next = lu.solve(psi);
    if (!next.allFinite() || !(next.array() > 0.0).all()) {
      // Roundoff at a nearly singular shift; retreat to the safe margin.
      for (Eigen::Index j = 0; j < n; ++j)
        *diag[static_cast<std::size_t>(j)] = base_diag[j] + hi + delta_max;
      lu.factorize(m);
      next = lu.solve(psi);
      if (!next.allFinite() || !(next.array() > 0.0).all())
        throw ConvergenceError("principal_eigenpair: iterate lost positivity");
    }
    psi = next / next.maxCoeff();
  }
  std::ostringstream msg;
  msg << "principal_eigenpair: no convergence in " << options.max_iter
      << " iterations (bracket [" << out.cw_lower << ", " << out.cw_upper << "])";
  throw ConvergenceError(msg.str());
}

Eigenpair policy_value(const DiffusionModel& model, const Grid& grid, const MarkovPolicy& policy,
                       const EigenOptions& options) {
  const GeneratorMatrix q = assemble_policy_generator(model, grid, policy, options.scheme);
  return principal_eigenpair(q.rates, policy_cost(model, grid, policy), grid.origin_node(), options);
}

LyapunovCertificate foster_lyapunov_certificate(const DiffusionModel& model, const Grid& grid,
                                                const MarkovPolicy& policy, const CostFn& h,
                                                double scale, double core_radius,
                                                const EigenOptions& options) {
  if (scale < 0.0) throw ValidationError("foster_lyapunov_certificate: scale must be >= 0");
  const GeneratorMatrix q = assemble_policy_generator(model, grid, policy, options.scheme);
  NodeVector hv(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    double v = 0.0;
    for (const auto& [c, w] : policy.assignment[static_cast<std::size_t>(i)])
      v += w * h(x, model.control(c));
    hv[i] = scale * v;
  }
  LyapunovCertificate cert;
  cert.pair = principal_eigenpair(q.rates, hv, grid.origin_node(), options);
  cert.core_radius = core_radius;
  cert.drift_margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (grid.coord(i).norm() > core_radius)
      cert.drift_margin = std::min(cert.drift_margin, hv[i] - cert.pair.value);
  return cert;
}

void write_eigenvector_csv(std::ostream& os, const Grid& grid, const NodeVector& psi) {
  CsvWriter csv(os);
  std::vector<std::string> header;
  for (int k = 0; k < grid.dim(); ++k) header.push_back("x" + std::to_string(k));
  header.push_back("psi");
  csv.header(header);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    std::vector<double> row(x.data(), x.data() + x.size());
    row.push_back(psi[i]);
    csv.row(row);
  }
}

}  // namespace ersc

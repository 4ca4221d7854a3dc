#include "ersc/discretize.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>
#include <string_view>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace ersc {

Grid::Grid(std::vector<double> radii, std::vector<int> counts)
    : radii_(std::move(radii)), counts_(std::move(counts)) {
  const int d = dim();
  spacing_.resize(d);
  strides_.resize(d);
  size_ = 1;
  for (int k = d - 1; k >= 0; --k) {
    spacing_[k] = 2.0 * radii_[k] / (counts_[k] - 1);
    strides_[k] = size_;
    size_ *= counts_[k];
  }
  origin_ = 0;
  for (int k = 0; k < d; ++k) {
    const long idx = std::lround(radii_[k] / spacing_[k]);
    origin_ += static_cast<Eigen::Index>(std::clamp<long>(idx, 0, counts_[k] - 1)) * strides_[k];
  }
}

Vec Grid::coord(Eigen::Index node) const {
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = coord(node, k);
  return x;
}

Eigen::Index Grid::shift(Eigen::Index node, int axis, int steps) const {
  const int i = axis_index(node, axis) + steps;
  if (i < 0 || i >= counts_[axis]) return -1;
  return node + steps * strides_[axis];
}

Eigen::Index Grid::nearest_node(const Vec& x) const {
  Eigen::Index node = 0;
  for (int k = 0; k < dim(); ++k) {
    const long idx = std::lround((x[k] + radii_[k]) / spacing_[k]);
    node += static_cast<Eigen::Index>(std::clamp<long>(idx, 0, counts_[k] - 1)) * strides_[k];
  }
  return node;
}

bool Grid::on_boundary(Eigen::Index node) const {
  for (int k = 0; k < dim(); ++k) {
    const int i = axis_index(node, k);
    if (i == 0 || i == counts_[k] - 1) return true;
  }
  return false;
}

bool Grid::contains(const Vec& x) const {
  for (int k = 0; k < dim(); ++k)
    if (std::abs(x[k]) > radii_[k]) return false;
  return true;
}

Grid build_grid(const std::vector<double>& radii, const std::vector<int>& counts,
                Eigen::Index node_cap) {
  if (radii.empty() || radii.size() != counts.size())
    throw ValidationError("build_grid: radii and counts must be non-empty and of equal length");
  if (static_cast<int>(radii.size()) > kMaxDim) throw ValidationError("build_grid: too many axes");
  double total = 1.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0)) throw ValidationError("build_grid: radii must be positive");
    if (counts[k] < 3) throw ValidationError("build_grid: counts must be >= 3");
    total *= counts[k];
  }
  if (total > static_cast<double>(node_cap)) {
    std::ostringstream msg;
    msg << "build_grid: " << static_cast<long long>(total) << " nodes exceed the cap of "
        << node_cap;
    throw ValidationError(msg.str());
  }
  return Grid(radii, counts);
}

namespace {

void add_rate(std::vector<StencilEntry>& out, Eigen::Index col, double rate) {
  if (col < 0 || rate == 0.0) return;
  for (auto& e : out) {
    if (e.col == col) {
      e.rate += rate;
      return;
    }
  }
  out.push_back({col, rate});
}

// Neighbor two axes away; -1 when outside the box.
Eigen::Index shift2(const Grid& g, Eigen::Index node, int k, int sk, int l, int sl) {
  const Eigen::Index a = g.shift(node, k, sk);
  return a < 0 ? -1 : g.shift(a, l, sl);
}

}  // namespace

void node_stencil(const Grid& grid, Eigen::Index node, const Vec& b, const Mat& a,
                  DriftScheme scheme, std::vector<StencilEntry>& out) {
  out.clear();
  const int d = grid.dim();
  // Axis weights after subtracting the cross-term corrections.
  std::array<double, kMaxDim> axis_w{};
  for (int k = 0; k < d; ++k) {
    const double hk = grid.spacing(k);
    axis_w[k] = 0.5 * a(k, k) / (hk * hk);
  }
  for (int k = 0; k < d; ++k) {
    for (int l = k + 1; l < d; ++l) {
      const double akl = a(k, l);
      if (akl == 0.0) continue;
      const double c = std::abs(akl) / (2.0 * grid.spacing(k) * grid.spacing(l));
      const int sl = akl > 0.0 ? 1 : -1;
      add_rate(out, shift2(grid, node, k, 1, l, sl), c);
      add_rate(out, shift2(grid, node, k, -1, l, -sl), c);
      axis_w[k] -= c;
      axis_w[l] -= c;
    }
  }
  for (int k = 0; k < d; ++k) {
    const double hk = grid.spacing(k);
    if (axis_w[k] < 0.0) {
      std::ostringstream msg;
      msg << "cross-derivative splitting loses monotonicity at node " << node
          << " (axis " << k << "); the diffusion matrix is not diagonally dominant relative "
          << "to the grid spacings - refine or rescale the grid axes";
      throw ValidationError(msg.str());
    }
    double right = axis_w[k], left = axis_w[k];
    const double half = 0.5 * b[k] / hk;
    if (scheme == DriftScheme::hybrid && axis_w[k] > std::abs(half)) {
      right += half;
      left -= half;
    } else if (b[k] > 0.0) {
      right += b[k] / hk;
    } else {
      left -= b[k] / hk;
    }
    add_rate(out, grid.shift(node, k, 1), right);
    add_rate(out, grid.shift(node, k, -1), left);
  }
}

namespace {

GeneratorMatrix assemble_rows(const Grid& grid,
                              const std::function<void(Eigen::Index, std::vector<StencilEntry>&)>& row) {
  const Eigen::Index n = grid.size();
  GeneratorMatrix g;
  g.rates.resize(n, n);
  Eigen::VectorXi nnz(n);
  std::vector<std::vector<StencilEntry>> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    row(i, r);
    nnz[i] = static_cast<int>(r.size()) + 1;
  }
  g.rates.reserve(nnz);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    double diag = 0.0;
    for (const auto& e : r) {
      if (e.rate < 0.0) {
        std::ostringstream msg;
        msg << "negative off-diagonal rate " << e.rate << " at node " << i;
        throw ValidationError(msg.str());
      }
      diag -= e.rate;
    }
    r.push_back({i, diag});
    std::sort(r.begin(), r.end(), [](const auto& x, const auto& y) { return x.col < y.col; });
    for (const auto& e : r) g.rates.insert(i, e.col) = e.rate;
  }
  g.rates.makeCompressed();
  return g;
}

}  // namespace

GeneratorMatrix assemble_generator(const DiffusionModel& model, const Grid& grid, const Vec& u,
                                   DriftScheme scheme) {
  if (model.dim != grid.dim()) throw ValidationError("assemble_generator: dimension mismatch");
  auto g = assemble_rows(grid, [&](Eigen::Index i, std::vector<StencilEntry>& out) {
    const Vec x = grid.coord(i);
    node_stencil(grid, i, model.drift(x, u), model.diffusion(x), scheme, out);
  });
  std::ostringstream tag;
  tag << "u=" << u.transpose();
  g.control_tag = tag.str();
  return g;
}

GeneratorMatrix assemble_policy_generator(const DiffusionModel& model, const Grid& grid,
                                          const MarkovPolicy& policy, DriftScheme scheme) {
  if (model.dim != grid.dim()) throw ValidationError("assemble_policy_generator: dimension mismatch");
  policy.validate(static_cast<std::size_t>(grid.size()), model.controls.size());
  std::vector<StencilEntry> part;
  auto g = assemble_rows(grid, [&](Eigen::Index i, std::vector<StencilEntry>& out) {
    const Vec x = grid.coord(i);
    const Mat a = model.diffusion(x);
    const auto& mix = policy.assignment[static_cast<std::size_t>(i)];
    if (mix.size() == 1) {
      node_stencil(grid, i, model.drift(x, model.control(mix[0].first)), a, scheme, out);
      return;
    }
    out.clear();
    for (const auto& [c, w] : mix) {
      node_stencil(grid, i, model.drift(x, model.control(c)), a, scheme, part);
      for (const auto& e : part) add_rate(out, e.col, w * e.rate);
    }
  });
  g.control_tag = policy.tag.empty() ? "policy" : policy.tag;
  return g;
}

GeneratorMatrix assemble_drift_generator(const DiffusionModel& model, const Grid& grid,
                                         const std::vector<Vec>& drift, DriftScheme scheme) {
  if (static_cast<Eigen::Index>(drift.size()) != grid.size())
    throw ValidationError("assemble_drift_generator: drift field size mismatch");
  auto g = assemble_rows(grid, [&](Eigen::Index i, std::vector<StencilEntry>& out) {
    node_stencil(grid, i, drift[static_cast<std::size_t>(i)], model.diffusion(grid.coord(i)),
                 scheme, out);
  });
  g.control_tag = "drift-field";
  return g;
}

NodeVector policy_cost(const DiffusionModel& model, const Grid& grid, const MarkovPolicy& policy) {
  policy.validate(static_cast<std::size_t>(grid.size()), model.controls.size());
  NodeVector r(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coord(i);
    double v = 0.0;
    for (const auto& [c, w] : policy.assignment[static_cast<std::size_t>(i)])
      v += w * model.cost(x, model.control(c));
    r[i] = v;
  }
  return r;
}

namespace {

std::vector<char> reach(const SparseRowMatrix& q, bool transpose) {
  const Eigen::Index n = q.rows();
  std::vector<std::vector<Eigen::Index>> adj;
  if (transpose) {
    adj.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (SparseRowMatrix::InnerIterator it(q, i); it; ++it)
        if (it.col() != i && it.value() > 0.0) adj[static_cast<std::size_t>(it.col())].push_back(i);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const Eigen::Index i = stack.back();
    stack.pop_back();
    auto visit = [&](Eigen::Index j) {
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        stack.push_back(j);
      }
    };
    if (transpose) {
      for (auto j : adj[static_cast<std::size_t>(i)]) visit(j);
    } else {
      for (SparseRowMatrix::InnerIterator it(q, i); it; ++it)
        if (it.col() != i && it.value() > 0.0) visit(it.col());
    }
  }
  return seen;
}

}  // namespace

bool is_irreducible(const SparseRowMatrix& q) {
  if (q.rows() <= 1) return true;
  for (char c : reach(q, false))
    if (!c) return false;
  for (char c : reach(q, true))
    if (!c) return false;
  return true;
}

double max_abs_row_sum(const SparseRowMatrix& q) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double s = 0.0;
    for (SparseRowMatrix::InnerIterator it(q, i); it; ++it) s += it.value();
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

double min_off_diagonal(const SparseRowMatrix& q) {
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (SparseRowMatrix::InnerIterator it(q, i); it; ++it)
      if (it.col() != i) worst = std::min(worst, it.value());
  return worst;
}

void write_coordinate(std::ostream& os, const SparseRowMatrix& q) {
  os << "row,col,value\n";
  char buf[64];
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (SparseRowMatrix::InnerIterator it(q, i); it; ++it) {
      auto res = std::to_chars(buf, buf + sizeof buf, it.value());
      os << i << ',' << it.col() << ',' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
}

}  // namespace ersc

#pragma once

#include "ersc/model.hpp"
#include "ersc/policy.hpp"
#include "ersc/types.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ersc {

/// Tensor-product grid on the box prod_k [-radius_k, radius_k], row-major
/// (the last axis varies fastest).
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<double> radii, std::vector<int> counts);

  int dim() const { return static_cast<int>(radii_.size()); }
  Eigen::Index size() const { return size_; }
  const std::vector<double>& radii() const { return radii_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<double>& spacing() const { return spacing_; }
  double spacing(int axis) const { return spacing_[axis]; }
  Eigen::Index origin_node() const { return origin_; }

  Vec coord(Eigen::Index node) const;
  double coord(Eigen::Index node, int axis) const {
    return -radii_[axis] + spacing_[axis] * axis_index(node, axis);
  }
  int axis_index(Eigen::Index node, int axis) const {
    return static_cast<int>((node / strides_[axis]) % counts_[axis]);
  }
  Eigen::Index stride(int axis) const { return strides_[axis]; }
  /// Node shifted by `steps` along `axis`, or -1 when it leaves the box.
  Eigen::Index shift(Eigen::Index node, int axis, int steps) const;
  Eigen::Index nearest_node(const Vec& x) const;
  bool on_boundary(Eigen::Index node) const;
  bool contains(const Vec& x) const;

 private:
  std::vector<double> radii_;
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<Eigen::Index> strides_;
  Eigen::Index size_ = 0;
  Eigen::Index origin_ = 0;
};

inline constexpr Eigen::Index kDefaultNodeCap = 2'000'000;

Grid build_grid(const std::vector<double>& radii, const std::vector<int>& counts,
                Eigen::Index node_cap = kDefaultNodeCap);

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class DriftScheme {
  upwind,  // one-sided differences in the direction of the drift
  hybrid,  // central differences wherever both neighbor rates stay positive
};

struct GeneratorMatrix {
  SparseRowMatrix rates;
  std::string boundary_policy = "reflecting";
  std::string control_tag;

  Eigen::Index size() const { return rates.rows(); }
};

struct StencilEntry {
  Eigen::Index col;
  double rate;
};

/// Off-diagonal rates of the generator row at `node` for local drift `b` and
/// diffusion matrix `a`; the diagonal is minus their sum. Transitions leaving the
/// box are dropped (reflection onto the boundary node).
void node_stencil(const Grid& grid, Eigen::Index node, const Vec& b, const Mat& a,
                  DriftScheme scheme, std::vector<StencilEntry>& out);

/// (Q f)_i for the stencil of node i.
inline double apply_stencil(const std::vector<StencilEntry>& stencil, Eigen::Index node,
                            const NodeVector& f) {
  double acc = 0.0;
  const double fi = f[node];
  for (const auto& e : stencil) acc += e.rate * (f[e.col] - fi);
  return acc;
}

GeneratorMatrix assemble_generator(const DiffusionModel& model, const Grid& grid,
                                   const Vec& u, DriftScheme scheme = DriftScheme::hybrid);

/// Row i uses control policy(i); relaxed nodes mix the precise rows linearly.
GeneratorMatrix assemble_policy_generator(const DiffusionModel& model, const Grid& grid,
                                          const MarkovPolicy& policy,
                                          DriftScheme scheme = DriftScheme::hybrid);

/// Generator for an arbitrary per-node drift field (used by the game module).
GeneratorMatrix assemble_drift_generator(const DiffusionModel& model, const Grid& grid,
                                         const std::vector<Vec>& drift,
                                         DriftScheme scheme = DriftScheme::hybrid);

/// Per-node cost r(x_i, policy(x_i)), mixing relaxed nodes linearly.
NodeVector policy_cost(const DiffusionModel& model, const Grid& grid, const MarkovPolicy& policy);

/// Strong connectivity of the off-diagonal sparsity graph.
bool is_irreducible(const SparseRowMatrix& q);

double max_abs_row_sum(const SparseRowMatrix& q);
double min_off_diagonal(const SparseRowMatrix& q);

/// Coordinate text dump: header "row,col,value", one nonzero per line.
void write_coordinate(std::ostream& os, const SparseRowMatrix& q);

}  // namespace ersc

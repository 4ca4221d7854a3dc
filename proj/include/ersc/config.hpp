#pragma once

#include "ersc/discretize.hpp"
#include "ersc/model.hpp"
#include "ersc/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ersc {

struct OuParams {
  double a = -1.0;
  double sigma = 1.0;
  double q = 0.75;
  double c = 2.0;
  double u_max = 0.0;
  int n_controls = 1;
};

struct ModelBlock {
  std::string name = "ou_lq";  // ou_lq | w_network | polynomial
  OuParams ou;
  WNetworkParams w = default_w_network_params();
  PolynomialModelSpec poly;
};

struct GridBlock {
  std::vector<double> radii{6.0};
  std::vector<int> counts{241};
};

struct SolverBlock {
  double tol = 1e-9;
  int max_iter = 200;
  DriftScheme scheme = DriftScheme::hybrid;
  int eigen_control = 0;  // constant control used by the eigen command
};

/// h (explicit mode) or hbar (blend mode) = constant + quadratic |x|^2.
struct PerturbBlock {
  double C3 = 0.5;
  std::string mode = "explicit";  // explicit | blend
  double constant = 1.0;
  double quadratic = 1.0;
  double collar = 0.5;
};

struct SweepBlock {
  std::vector<double> epsilon{0.0, 0.003125, 0.0015625, 0.00078125};
  std::vector<double> kappa{1.0, 0.5, 0.1, 0.01};
  std::vector<double> l{2.0, 4.0, 6.0, 8.0};
  double L_slope = 2.0;
  double L_intercept = 10.0;
};

struct GameBlock {
  double epsilon = 0.0;
  double l = 8.0;
  double L_star = 26.0;
  int isaacs_samples = 64;
};

struct SimulationBlock {
  SimulationConfig sim;
  std::vector<double> shells{1.0, 2.0, 3.0, 4.0};
  std::optional<double> truncation;
};

struct RepCheckBlock {
  double R = 1.0;
  std::vector<Vec> points;
  double T = 20.0;
  double dt = 1e-4;
  int n_paths = 2000;
  std::string sampling = "ground";  // ground | plain
};

struct AssumptionBlock {
  Mat Q;  // log-Lyapunov x^T Q x; empty means 0.1 I
  AssumptionConstants constants{2.0, 2.0, 0.5};
  double hbar_constant = 0.0;
  double hbar_quadratic = 0.1;
  double sample_radius = 4.0;
  int sample_counts = 9;
};

struct VariationalBlock {
  int n_spaces = 1000;
  int max_atoms = 64;
  double f_range = 20.0;
  std::uint64_t seed = 7;
};

struct OutputBlock {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct RunConfig {
  ModelBlock model;
  GridBlock grid;
  SolverBlock solver;
  PerturbBlock perturb;
  SweepBlock sweep;
  GameBlock game;
  SimulationBlock simulation;
  RepCheckBlock rep_check;
  AssumptionBlock assumptions;
  VariationalBlock variational;
  OutputBlock output;

  /// Canonical JSON with every default filled in; keys sorted.
  nlohmann::json to_json() const;
  /// 16-hex-digit FNV-1a of the canonical dump.
  std::string digest() const;
};

/// Parses and validates; unknown keys and out-of-range values throw ValidationError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Writes the canonical dump to dir/config.json; loading it reproduces the digest.
std::filesystem::path write_canonical_config(const RunConfig& config, const std::filesystem::path& dir);

DiffusionModel build_model(const ModelBlock& block);
Grid build_grid(const GridBlock& block);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace ersc

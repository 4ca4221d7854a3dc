#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ersc {

/// Stationary Markov policy on grid nodes. Each node carries a list of
/// (control index, weight) pairs; a precise policy has one pair of weight 1.
struct MarkovPolicy {
  using Mixture = std::vector<std::pair<int, double>>;

  std::vector<Mixture> assignment;
  std::string tag;

  static MarkovPolicy constant(std::size_t n_nodes, int control);
  static MarkovPolicy precise(const std::vector<int>& controls, std::string tag = {});

  std::size_t size() const { return assignment.size(); }
  bool is_precise() const;
  /// Control index at `node`; for relaxed nodes the highest-weight component.
  int control_at(std::size_t node) const;
  std::vector<int> controls() const;

  /// Throws ValidationError unless every node carries a nonnegative mixture of
  /// valid control indices summing to 1.
  void validate(std::size_t n_nodes, std::size_t n_controls) const;

  bool operator==(const MarkovPolicy& other) const { return assignment == other.assignment; }
};

}  // namespace ersc

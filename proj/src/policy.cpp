#include "ersc/policy.hpp"

#include "ersc/types.hpp"

#include <cmath>
#include <sstream>

namespace ersc {

MarkovPolicy MarkovPolicy::constant(std::size_t n_nodes, int control) {
  MarkovPolicy p;
  p.assignment.assign(n_nodes, Mixture{{control, 1.0}});
  p.tag = "constant";
  return p;
}

MarkovPolicy MarkovPolicy::precise(const std::vector<int>& controls, std::string tag) {
  MarkovPolicy p;
  p.assignment.reserve(controls.size());
  for (int c : controls) p.assignment.push_back(Mixture{{c, 1.0}});
  p.tag = std::move(tag);
  return p;
}

bool MarkovPolicy::is_precise() const {
  for (const auto& m : assignment)
    if (m.size() != 1) return false;
  return true;
}

int MarkovPolicy::control_at(std::size_t node) const {
  const auto& m = assignment.at(node);
  int best = m.front().first;
  double w = m.front().second;
  for (const auto& [c, wc] : m) {
    if (wc > w) {
      best = c;
      w = wc;
    }
  }
  return best;
}

std::vector<int> MarkovPolicy::controls() const {
  std::vector<int> out(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) out[i] = control_at(i);
  return out;
}

void MarkovPolicy::validate(std::size_t n_nodes, std::size_t n_controls) const {
  if (assignment.size() != n_nodes) {
    std::ostringstream msg;
    msg << "policy defined on " << assignment.size() << " nodes, grid has " << n_nodes;
    throw ValidationError(msg.str());
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto& m = assignment[i];
    if (m.empty()) throw ValidationError("policy undefined at node " + std::to_string(i));
    double total = 0.0;
    for (const auto& [c, w] : m) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_controls)
        throw ValidationError("policy uses unknown control at node " + std::to_string(i));
      if (!(w >= 0.0)) throw ValidationError("negative policy weight at node " + std::to_string(i));
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ValidationError("policy weights do not sum to 1 at node " + std::to_string(i));
  }
}

}  // namespace ersc

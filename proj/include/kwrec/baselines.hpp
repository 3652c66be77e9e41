#pragma once

#include "kwrec/dataset.hpp"
#include "kwrec/simulator.hpp"
#include "kwrec/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kwrec {

struct SelectionResult {
  std::string method;
  std::vector<int> selected;  // exactly K distinct candidate ids
  std::optional<Scalar> objective;  // the method's own claimed objective
  bool infeasible = false;          // IP fallback flag
};

/// Proxy for manual selection: uniform sample without replacement.
SelectionResult random_select(const std::vector<int>& candidates, int k_total,
                              std::uint64_t seed);

/// Top-k by latent volume, ties toward the lower id.
SelectionResult popularity_select(const std::vector<int>& candidates,
                                  int k_total, const SimWorld& world);

/// Top-k by maximum cosine similarity between the candidate's embedding
/// and any keyword the ad group already owns; ties toward the lower id.
SelectionResult relevance_select(const std::vector<int>& candidates,
                                 int k_total, const AdGroup& adgroup,
                                 const Dataset& dataset);

/// Exact cardinality-constrained knapsack over the static estimates:
/// maximize sum of r over subsets of size exactly k_total with
/// sum of c <= budget. Costs are discretized by rounding UP to multiples
/// of cost_resolution, which keeps the answer feasible against the true
/// costs. Value ties resolve to the lexicographically smallest id set.
/// When no subset fits the budget the minimum-cost k-subset is returned
/// with `infeasible` set.
SelectionResult ip_select(const std::vector<int>& candidates, int k_total,
                          Scalar budget, const SimWorld& world,
                          Scalar cost_resolution);

enum class BruteForceObjective {
  StaticValue,      // validates ip_select
  SimulatorReward,  // true optimality gaps on small instances
};

/// Full enumeration of all size-k subsets. Guarded by a combinatorial
/// bound of 1e6 subsets.
SelectionResult brute_force_select(const std::vector<int>& candidates,
                                   int k_total, Scalar budget,
                                   const SimWorld& world,
                                   BruteForceObjective objective);

}  // namespace kwrec

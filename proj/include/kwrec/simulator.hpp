#pragma once

#include "kwrec/dataset.hpp"
#include "kwrec/types.hpp"

#include <map>
#include <utility>
#include <vector>

namespace kwrec {

struct KeywordLatents {
  Scalar volume = 0.0;
  Scalar ctr = 0.0;
  Scalar cpc = 0.0;
  Vector embedding;
};

/// Deterministic auction environment. Internal competition: keywords with
/// similar embeddings share query volume; overlap_sharpness concentrates
/// the sharing among near-duplicates. External competition is baked into
/// the CPC latents.
struct SimWorld {
  std::map<int, KeywordLatents> keywords;
  Scalar overlap_sharpness = 8.0;
  std::uint64_t seed = 0;
};

SimWorld world_from(const Dataset& dataset, Scalar overlap_sharpness = 8.0);

/// max(0, cos(x_i, x_j))^gamma; symmetric, overlap(i,i) = 1.
Scalar overlap(const SimWorld& world, int i, int j);

struct RewardBreakdown {
  Scalar impressions = 0.0;
  Scalar spend = 0.0;
  /// (keyword id, budget-scaled marginal impressions), in canonical
  /// serving order (descending volume, ties by ascending id).
  std::vector<std::pair<int, Scalar>> marginals;
};

/// Episode reward. Selected keywords are served in descending-volume
/// order; each keyword's marginal volume is its own volume damped by
/// (1 - overlap) against every keyword already served. If standalone
/// spend exceeds the budget, everything is throttled pro rata.
RewardBreakdown reward_detailed(const SimWorld& world,
                                const std::vector<int>& selection,
                                Scalar budget);

/// (impressions, spend) of reward_detailed.
std::pair<Scalar, Scalar> reward(const SimWorld& world,
                                 const std::vector<int>& selection,
                                 Scalar budget);

/// Overlap-free per-keyword estimates the IP baseline assumes constant:
/// r = volume, c = volume * ctr * cpc.
std::pair<Scalar, Scalar> static_estimates(const SimWorld& world, int id);

}  // namespace kwrec

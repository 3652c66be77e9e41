#include "kwrec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kwrec {

namespace {

const KeywordLatents& latents_of(const SimWorld& world, int id) {
  auto it = world.keywords.find(id);
  if (it == world.keywords.end()) {
    throw LookupError("simulator: unknown keyword id " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

SimWorld world_from(const Dataset& dataset, Scalar overlap_sharpness) {
  if (!(overlap_sharpness > 0.0)) {
    throw ArgumentError("world_from: overlap_sharpness must be > 0");
  }
  SimWorld world;
  world.overlap_sharpness = overlap_sharpness;
  world.seed = dataset.seed;
  for (const auto& [id, rec] : dataset.keywords) {
    world.keywords.emplace(
        id, KeywordLatents{rec.latent_volume, rec.latent_ctr, rec.latent_cpc,
                           rec.embedding});
  }
  return world;
}

Scalar overlap(const SimWorld& world, int i, int j) {
  const KeywordLatents& a = latents_of(world, i);
  const KeywordLatents& b = latents_of(world, j);
  // Identical embeddings share everything; the shortcut keeps the
  // duplicate case exact where rounding in dot/norm would not.
  if (a.embedding == b.embedding) return 1.0;
  const Scalar cosine = a.embedding.dot(b.embedding) /
                        (a.embedding.norm() * b.embedding.norm());
  if (cosine <= 0.0) return 0.0;
  return std::pow(std::min(cosine, 1.0), world.overlap_sharpness);
}

RewardBreakdown reward_detailed(const SimWorld& world,
                                const std::vector<int>& selection,
                                Scalar budget) {
  if (!(budget > 0.0)) throw ArgumentError("reward: budget must be > 0");
  std::set<int> unique(selection.begin(), selection.end());
  if (unique.size() != selection.size()) {
    throw ArgumentError("reward: duplicate keyword ids in selection");
  }

  // Canonical serving order: descending volume, ties by ascending id.
  std::vector<int> order(selection);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Scalar va = latents_of(world, a).volume;
    const Scalar vb = latents_of(world, b).volume;
    if (va != vb) return va > vb;
    return a < b;
  });

  RewardBreakdown out;
  std::vector<Scalar> marginal(order.size(), 0.0);
  Scalar raw_impressions = 0.0;
  Scalar raw_spend = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const KeywordLatents& kw = latents_of(world, order[i]);
    Scalar share = kw.volume;
    for (std::size_t j = 0; j < i; ++j) {
      share *= 1.0 - overlap(world, order[i], order[j]);
    }
    marginal[i] = share;
    raw_impressions += share;
    raw_spend += share * kw.ctr * kw.cpc;
  }

  const Scalar throttle = raw_spend > budget ? budget / raw_spend : 1.0;
  out.impressions = raw_impressions * throttle;
  out.spend = std::min(raw_spend, budget);
  out.marginals.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.marginals.emplace_back(order[i], marginal[i] * throttle);
  }
  return out;
}

std::pair<Scalar, Scalar> reward(const SimWorld& world,
                                 const std::vector<int>& selection,
                                 Scalar budget) {
  const RewardBreakdown breakdown = reward_detailed(world, selection, budget);
  return {breakdown.impressions, breakdown.spend};
}

std::pair<Scalar, Scalar> static_estimates(const SimWorld& world, int id) {
  const KeywordLatents& kw = latents_of(world, id);
  return {kw.volume, kw.volume * kw.ctr * kw.cpc};
}

}  // namespace kwrec

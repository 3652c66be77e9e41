#include "kwrec/baselines.hpp"

#include "kwrec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kwrec {

namespace {

void check_k(std::size_t n, int k_total) {
  if (k_total < 0 || static_cast<std::size_t>(k_total) > n) {
    throw ArgumentError("selection: need 0 <= K <= number of candidates, got K=" +
                        std::to_string(k_total) + ", N=" + std::to_string(n));
  }
}

}  // namespace

SelectionResult random_select(const std::vector<int>& candidates, int k_total,
                              std::uint64_t seed) {
  check_k(candidates.size(), k_total);
  Rng rng(seed);
  const std::vector<int> positions =
      rng.sample_without_replacement(static_cast<int>(candidates.size()), k_total);
  SelectionResult result;
  result.method = "random";
  for (int pos : positions) {
    result.selected.push_back(candidates[static_cast<std::size_t>(pos)]);
  }
  return result;
}

SelectionResult popularity_select(const std::vector<int>& candidates,
                                  int k_total, const SimWorld& world) {
  check_k(candidates.size(), k_total);
  std::vector<int> sorted(candidates);
  std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    const Scalar va = world.keywords.at(a).volume;
    const Scalar vb = world.keywords.at(b).volume;
    if (va != vb) return va > vb;
    return a < b;
  });
  SelectionResult result;
  result.method = "pb";
  result.selected.assign(sorted.begin(), sorted.begin() + k_total);
  return result;
}

SelectionResult relevance_select(const std::vector<int>& candidates,
                                 int k_total, const AdGroup& adgroup,
                                 const Dataset& dataset) {
  check_k(candidates.size(), k_total);
  if (adgroup.existing_ids.empty()) {
    throw ArgumentError("relevance_select: ad group owns no keywords");
  }
  std::vector<std::pair<Scalar, int>> scored;
  scored.reserve(candidates.size());
  for (int id : candidates) {
    const Vector& emb = dataset.keywords.at(id).embedding;
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (int owned : adgroup.existing_ids) {
      const Vector& other = dataset.keywords.at(owned).embedding;
      const Scalar cosine =
          emb.dot(other) / (emb.norm() * other.norm());
      if (cosine > best) best = cosine;
    }
    scored.emplace_back(best, id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  SelectionResult result;
  result.method = "rb";
  for (int i = 0; i < k_total; ++i) {
    result.selected.push_back(scored[static_cast<std::size_t>(i)].second);
  }
  return result;
}

SelectionResult ip_select(const std::vector<int>& candidates, int k_total,
                          Scalar budget, const SimWorld& world,
                          Scalar cost_resolution) {
  check_k(candidates.size(), k_total);
  if (!(budget > 0.0)) throw ArgumentError("ip_select: budget must be > 0");
  if (!(cost_resolution > 0.0)) {
    throw ArgumentError("ip_select: cost_resolution must be > 0");
  }

  // Items in ascending id order; the greedy include-if-optimal walk over
  // this order yields the lexicographically smallest optimal id set.
  std::vector<int> items(candidates);
  std::sort(items.begin(), items.end());
  const int n = static_cast<int>(items.size());

  std::vector<Scalar> value(static_cast<std::size_t>(n));
  std::vector<Scalar> true_cost(static_cast<std::size_t>(n));
  std::vector<long> weight(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto [r, c] = static_estimates(world, items[static_cast<std::size_t>(i)]);
    value[static_cast<std::size_t>(i)] = r;
    true_cost[static_cast<std::size_t>(i)] = c;
    long w = static_cast<long>(std::ceil(c / cost_resolution));
    while (static_cast<Scalar>(w) * cost_resolution < c) ++w;  // round UP
    weight[static_cast<std::size_t>(i)] = std::max(w, 0L);
  }
  long budget_units = static_cast<long>(
      std::floor(std::min(budget / cost_resolution, Scalar(1e18))));
  while (static_cast<Scalar>(budget_units) * cost_resolution > budget) {
    --budget_units;
  }
  // A slack budget needs no more units than every item together weighs.
  long total_weight = 0;
  for (long w : weight) total_weight += w;
  budget_units = std::min(budget_units, total_weight);

  SelectionResult result;
  result.method = "ip";
  if (k_total == 0) {
    result.objective = 0.0;
    return result;
  }

  if (budget_units >= 0) {
    const long w_cap = budget_units;
    const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
    // dp[i][c][w]: best value using items i..n-1 with exactly c picks and
    // total weight <= w. Stored as flat layers for the suffix walk.
    const std::size_t layer =
        static_cast<std::size_t>(k_total + 1) * static_cast<std::size_t>(w_cap + 1);
    std::vector<Scalar> dp(static_cast<std::size_t>(n + 1) * layer, neg_inf);
    const auto at = [&](int i, int c, long w) -> Scalar& {
      return dp[static_cast<std::size_t>(i) * layer +
                static_cast<std::size_t>(c) * static_cast<std::size_t>(w_cap + 1) +
                static_cast<std::size_t>(w)];
    };
    for (long w = 0; w <= w_cap; ++w) at(n, 0, w) = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      for (int c = 0; c <= k_total; ++c) {
        for (long w = 0; w <= w_cap; ++w) {
          Scalar best = at(i + 1, c, w);
          if (c > 0 && weight[static_cast<std::size_t>(i)] <= w) {
            const Scalar with =
                at(i + 1, c - 1, w - weight[static_cast<std::size_t>(i)]);
            if (with > neg_inf) {
              const Scalar candidate = with + value[static_cast<std::size_t>(i)];
              if (candidate > best) best = candidate;
            }
          }
          at(i, c, w) = best;
        }
      }
    }
    if (at(0, k_total, w_cap) > neg_inf) {
      // Reconstruct, preferring inclusion whenever it stays optimal.
      int c = k_total;
      long w = w_cap;
      for (int i = 0; i < n && c > 0; ++i) {
        if (weight[static_cast<std::size_t>(i)] > w) continue;
        const Scalar with = at(i + 1, c - 1, w - weight[static_cast<std::size_t>(i)]);
        if (with > -std::numeric_limits<Scalar>::infinity() &&
            with + value[static_cast<std::size_t>(i)] == at(i, c, w)) {
          result.selected.push_back(items[static_cast<std::size_t>(i)]);
          w -= weight[static_cast<std::size_t>(i)];
          --c;
        }
      }
      result.objective = at(0, k_total, w_cap);
      return result;
    }
  }

  // Infeasible: fall back to the cheapest k-subset so benchmarks never
  // crash on tight budgets.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (true_cost[static_cast<std::size_t>(a)] !=
        true_cost[static_cast<std::size_t>(b)]) {
      return true_cost[static_cast<std::size_t>(a)] <
             true_cost[static_cast<std::size_t>(b)];
    }
    return items[static_cast<std::size_t>(a)] < items[static_cast<std::size_t>(b)];
  });
  Scalar total_value = 0.0;
  for (int i = 0; i < k_total; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    result.selected.push_back(items[static_cast<std::size_t>(idx)]);
    total_value += value[static_cast<std::size_t>(idx)];
  }
  std::sort(result.selected.begin(), result.selected.end());
  result.objective = total_value;
  result.infeasible = true;
  return result;
}

SelectionResult brute_force_select(const std::vector<int>& candidates,
                                   int k_total, Scalar budget,
                                   const SimWorld& world,
                                   BruteForceObjective objective) {
  check_k(candidates.size(), k_total);
  const int n = static_cast<int>(candidates.size());

  // C(n, k) with early exit against the enumeration bound.
  double combos = 1.0;
  for (int i = 1; i <= k_total; ++i) {
    combos *= static_cast<double>(n - k_total + i) / static_cast<double>(i);
    if (combos > 1e6) {
      throw SizeError("brute_force_select: C(N,K) exceeds 1e6 subsets");
    }
  }

  std::vector<int> items(candidates);
  std::sort(items.begin(), items.end());

  SelectionResult result;
  result.method = "brute";
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(k_total));
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<int> subset(static_cast<std::size_t>(k_total));
  bool done = k_total == 0;
  if (done) {
    result.objective = 0.0;
    return result;
  }
  while (true) {
    for (int i = 0; i < k_total; ++i) {
      subset[static_cast<std::size_t>(i)] =
          items[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
    }
    Scalar score;
    if (objective == BruteForceObjective::StaticValue) {
      Scalar total_value = 0.0;
      Scalar total_cost = 0.0;
      for (int id : subset) {
        const auto [r, c] = static_estimates(world, id);
        total_value += r;
        total_cost += c;
      }
      score = total_cost <= budget
                  ? total_value
                  : -std::numeric_limits<Scalar>::infinity();
    } else {
      score = reward(world, subset, budget).first;
    }
    if (score > best) {
      best = score;
      result.selected = subset;
    }
    // next lexicographic combination
    int i = k_total - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k_total + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k_total; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  if (!std::isfinite(best)) {
    // No subset fits the budget under the static objective.
    result.infeasible = true;
    best = -std::numeric_limits<Scalar>::infinity();
    result.objective = best;
    return result;
  }
  result.objective = best;
  return result;
}

}  // namespace kwrec

#pragma once

#include "kwrec/actor.hpp"
#include "kwrec/checkpoint.hpp"
#include "kwrec/clustering.hpp"
#include "kwrec/critic.hpp"
#include "kwrec/dataset.hpp"
#include "kwrec/simulator.hpp"
#include "kwrec/types.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace kwrec {

struct Episode {
  int adgroup_id = 0;
  int iteration = 0;  // provenance: actor updates must stay on-policy
  Matrix centroids;
  Rollout rollout;
  Scalar reward = 0.0;    // raw impressions from the simulator
  Scalar baseline = 0.0;  // critic estimate at collection time
};

/// Bounded FIFO of episodes; eviction is strictly oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Episode episode);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Episode& at(std::size_t i) const;  // 0 is the oldest entry

 private:
  std::size_t capacity_;
  std::deque<Episode> entries_;
};

struct TrainConfig {
  int iterations = 0;
  int batch_size = 16;
  std::size_t replay_capacity = 10000;
  int replay_sample = 64;
  Scalar lr_actor = 1e-3;
  Scalar lr_critic = 1e-3;
  int cluster_size = 10;  // n; must divide output_size
  int output_size = 0;    // K_total
  std::uint64_t seed = 0;
  int checkpoint_every = 0;        // 0: only the final checkpoint
  std::string checkpoint_path;     // cadence sink; may be empty
  Index model_dim = 32;
  bool measure_time = true;  // off: wall_ms is reported as 0 for
                             // byte-stable metrics files
};

struct IterationStats {
  int iteration = 0;
  Scalar mean_reward = 0.0;  // raw impressions, batch mean
  Scalar critic_loss = 0.0;
  Scalar advantage_sd = 0.0;
  long wall_ms = 0;
  std::vector<int> actor_episode_iterations;
  std::vector<int> critic_episode_iterations;
};

using TrainObserver = std::function<void(const IterationStats&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<IterationStats> stats;
};

/// Actor-critic loop: per iteration, batch_size sampled-mode rollouts on
/// training-split ad groups are scored by the simulator; the actor ascends
/// the REINFORCE gradient of the fresh batch while the critic descends its
/// squared error on episodes drawn from the replay buffer. Rewards are
/// normalized by a running mean (window 100) before advantage computation;
/// raw rewards are what the metrics report. Deterministic given the seed.
TrainResult train(const Dataset& dataset, const ClusterSet& clusters,
                  const SimWorld& world, const TrainConfig& config,
                  const TrainObserver& observer = nullptr);

struct EvalRow {
  int adgroup = 0;
  Scalar impressions = 0.0;
  Scalar spend = 0.0;
  int active_keywords = 0;  // keywords with nonzero marginal impressions
};

struct EvalTable {
  std::vector<EvalRow> rows;
  Scalar mean_impressions = 0.0;
  Scalar sd_impressions = 0.0;
  Scalar mean_spend = 0.0;
  Scalar mean_active_keywords = 0.0;
};

/// Greedy-mode evaluation over the dataset's test split (capped at
/// max_adgroups when nonnegative).
EvalTable evaluate(const Checkpoint& checkpoint, const Dataset& dataset,
                   const ClusterSet& clusters, const SimWorld& world,
                   int max_adgroups = -1);

/// Greedy selection of output_size keywords for one ad group.
std::vector<int> recommend_keywords(const Checkpoint& checkpoint,
                                    const Clustering& clustering,
                                    std::vector<int>* selected_clusters = nullptr);

std::string metrics_to_csv(const std::vector<IterationStats>& stats);

}  // namespace kwrec

#include "kwrec/training.hpp"

#include "kwrec/text_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace kwrec {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;   // parameter init
constexpr std::uint64_t kLoopStream = 0x6c6f6f70;   // sampling decisions
constexpr Scalar kScaleFloor = 1e-9;
constexpr std::size_t kRewardWindow = 100;

void validate_config(const TrainConfig& config) {
  if (config.iterations < 0) throw ArgumentError("train: iterations must be >= 0");
  if (config.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  if (config.replay_capacity < 1) {
    throw ArgumentError("train: replay_capacity must be >= 1");
  }
  if (config.replay_sample < 1) {
    throw ArgumentError("train: replay_sample must be >= 1");
  }
  if (config.lr_actor < 0 || config.lr_critic < 0) {
    throw ArgumentError("train: learning rates must be >= 0");
  }
  if (config.cluster_size < 1 || config.output_size < 1) {
    throw ArgumentError("train: cluster_size and output_size must be >= 1");
  }
  if (config.output_size % config.cluster_size != 0) {
    throw ArgumentError("train: cluster_size must divide output_size");
  }
  if (config.model_dim < 1) throw ArgumentError("train: model_dim must be >= 1");
}

/// A clustering is usable for training only when every cluster is exactly
/// full, so that decode_steps selections always expand to output_size ids.
void validate_clustering(const Clustering& clustering, const TrainConfig& config,
                         int adgroup) {
  const std::string where = " (ad group " + std::to_string(adgroup) + ")";
  if (clustering.max_size != config.cluster_size) {
    throw ArgumentError("train: clustering max_size " +
                        std::to_string(clustering.max_size) +
                        " does not match configured cluster size " +
                        std::to_string(config.cluster_size) + where);
  }
  for (const Cluster& cluster : clustering.clusters) {
    if (static_cast<int>(cluster.member_ids.size()) != config.cluster_size) {
      throw ArgumentError(
          "train: cluster sizes must all equal the configured cluster size" +
          where);
    }
  }
  const int decode_steps = config.output_size / config.cluster_size;
  if (decode_steps > static_cast<int>(clustering.clusters.size())) {
    throw ArgumentError("train: output_size needs more clusters than exist" +
                        where);
  }
}

Scalar population_sd(const std::vector<Scalar>& xs) {
  if (xs.empty()) return 0.0;
  const Scalar mean =
      std::accumulate(xs.begin(), xs.end(), Scalar(0)) /
      static_cast<Scalar>(xs.size());
  Scalar var = 0.0;
  for (Scalar x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<Scalar>(xs.size()));
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ArgumentError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Episode episode) {
  entries_.push_back(std::move(episode));
  while (entries_.size() > capacity_) entries_.pop_front();
}

const Episode& ReplayBuffer::at(std::size_t i) const {
  if (i >= entries_.size()) throw ArgumentError("replay index out of range");
  return entries_[i];
}

TrainResult train(const Dataset& dataset, const ClusterSet& clusters,
                  const SimWorld& world, const TrainConfig& config,
                  const TrainObserver& observer) {
  validate_config(config);
  const auto [train_ids, test_ids] = split_adgroups(dataset);
  (void)test_ids;
  const int decode_steps = config.output_size / config.cluster_size;

  struct GroupContext {
    int id;
    Scalar budget;
    Matrix centroid_matrix;
    const Clustering* clustering;
  };
  std::vector<GroupContext> groups;
  for (int id : train_ids) {
    auto it = clusters.by_adgroup.find(id);
    if (it == clusters.by_adgroup.end()) {
      throw ArgumentError("train: no clustering for ad group " +
                          std::to_string(id));
    }
    validate_clustering(it->second, config, id);
    const AdGroup* group = nullptr;
    for (const AdGroup& g : dataset.ad_groups) {
      if (g.id == id) group = &g;
    }
    if (group == nullptr) {
      throw ArgumentError("train: clustering refers to unknown ad group");
    }
    groups.push_back(
        {id, group->budget, centroids(it->second), &it->second});
  }
  if (groups.empty()) throw ArgumentError("train: no training ad groups");

  TrainResult result;
  Checkpoint& cp = result.checkpoint;
  cp.feature_dim = dataset.feature_dim;
  cp.model_dim = config.model_dim;
  cp.cluster_size = config.cluster_size;
  cp.output_size = config.output_size;
  cp.seed = config.seed;
  cp.iteration = 0;

  Rng init_rng(mix_seed(config.seed, kInitStream, 0));
  const ActorConfig actor_config{dataset.feature_dim, config.model_dim};
  const CriticConfig critic_config{dataset.feature_dim, config.model_dim, 32};
  create_actor_params(cp.params, "actor.", actor_config, init_rng);
  create_critic_params(cp.params, "critic.", critic_config, init_rng);
  cp.adam_actor = AdamState(AdamConfig{config.lr_actor, 0.9, 0.999, 1e-8});
  cp.adam_critic = AdamState(AdamConfig{config.lr_critic, 0.9, 0.999, 1e-8});

  const ActorParams actor{&cp.params, "actor.", actor_config};
  const CriticParams critic{&cp.params, "critic.", critic_config};

  Rng loop_rng(mix_seed(config.seed, kLoopStream, 0));
  ReplayBuffer replay(config.replay_capacity);
  std::deque<Scalar> reward_window;

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const auto t_start = std::chrono::steady_clock::now();

    // Fresh on-policy batch (Sample mode) with per-slot derived streams.
    std::vector<Episode> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int slot = 0; slot < config.batch_size; ++slot) {
      const GroupContext& g =
          groups[static_cast<std::size_t>(loop_rng.uniform_int(
              static_cast<int>(groups.size())))];
      Rng episode_rng(mix_seed(config.seed, static_cast<std::uint64_t>(iter),
                               static_cast<std::uint64_t>(slot) + 1));
      Episode ep;
      ep.adgroup_id = g.id;
      ep.iteration = iter;
      ep.centroids = g.centroid_matrix;
      ep.rollout = rollout(actor, g.centroid_matrix, decode_steps,
                           DecodeMode::Sample, &episode_rng);
      const std::vector<int> keywords =
          expand(*g.clustering, ep.rollout.selected);
      ep.reward = reward(world, keywords, g.budget).first;
      ep.baseline = baseline(critic, g.centroid_matrix);
      batch.push_back(std::move(ep));
    }

    for (const Episode& ep : batch) {
      reward_window.push_back(ep.reward);
      while (reward_window.size() > kRewardWindow) reward_window.pop_front();
    }
    const Scalar scale = std::max(
        kScaleFloor,
        std::accumulate(reward_window.begin(), reward_window.end(), Scalar(0)) /
            static_cast<Scalar>(reward_window.size()));

    // Actor: ascend the policy-gradient estimate from the fresh batch.
    std::vector<ActorEpisode> actor_batch;
    std::vector<Scalar> advantages;
    actor_batch.reserve(batch.size());
    for (const Episode& ep : batch) {
      ActorEpisode ae;
      ae.rollout = ep.rollout;
      ae.reward = ep.reward / scale;
      ae.baseline = ep.baseline;
      ae.centroids = ep.centroids;
      actor_batch.push_back(std::move(ae));
      advantages.push_back(ep.reward / scale - ep.baseline);
    }
    GradMap actor_grads = actor_gradient(actor, actor_batch);
    for (auto& [name, grad] : actor_grads) grad = -grad;
    cp.adam_actor.step(cp.params, actor_grads);

    IterationStats stats;
    stats.iteration = iter;
    for (const Episode& ep : batch) {
      stats.mean_reward += ep.reward;
      stats.actor_episode_iterations.push_back(ep.iteration);
    }
    stats.mean_reward /= static_cast<Scalar>(batch.size());
    stats.advantage_sd = population_sd(advantages);

    for (Episode& ep : batch) replay.push(std::move(ep));

    // Critic: descend Eq-style squared error on replayed episodes,
    // rescaled by the current running mean.
    std::vector<CriticSample> critic_batch;
    critic_batch.reserve(static_cast<std::size_t>(config.replay_sample));
    for (int i = 0; i < config.replay_sample; ++i) {
      const Episode& ep =
          replay.at(static_cast<std::size_t>(loop_rng.uniform_int(
              static_cast<int>(replay.size()))));
      critic_batch.push_back({ep.centroids, ep.reward / scale});
      stats.critic_episode_iterations.push_back(ep.iteration);
    }
    auto [loss, critic_grads] = critic_loss_and_grad(critic, critic_batch);
    cp.adam_critic.step(cp.params, critic_grads);
    stats.critic_loss = loss;

    if (config.measure_time) {
      stats.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
    }
    cp.iteration = iter;
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        iter % config.checkpoint_every == 0) {
      save_checkpoint(cp, config.checkpoint_path);
    }
    if (observer) observer(stats);
    result.stats.push_back(std::move(stats));
  }
  return result;
}

std::vector<int> recommend_keywords(const Checkpoint& checkpoint,
                                    const Clustering& clustering,
                                    std::vector<int>* selected_clusters) {
  const int decode_steps = checkpoint.output_size / checkpoint.cluster_size;
  const Matrix c = centroids(clustering);
  if (c.cols() != checkpoint.feature_dim) {
    throw SchemaError("recommend: clustering feature_dim " +
                      std::to_string(c.cols()) +
                      " does not match checkpoint " +
                      std::to_string(checkpoint.feature_dim));
  }
  const Rollout r =
      rollout(actor_view(checkpoint), c, decode_steps, DecodeMode::Greedy);
  if (selected_clusters != nullptr) *selected_clusters = r.selected;
  return expand(clustering, r.selected);
}

EvalTable evaluate(const Checkpoint& checkpoint, const Dataset& dataset,
                   const ClusterSet& clusters, const SimWorld& world,
                   int max_adgroups) {
  const auto [train_ids, test_ids] = split_adgroups(dataset);
  (void)train_ids;
  EvalTable table;
  std::vector<Scalar> impressions;
  for (int id : test_ids) {
    if (max_adgroups >= 0 &&
        static_cast<int>(table.rows.size()) >= max_adgroups) {
      break;
    }
    auto it = clusters.by_adgroup.find(id);
    if (it == clusters.by_adgroup.end()) {
      throw SchemaError("evaluate: no clustering for ad group " +
                        std::to_string(id));
    }
    if (it->second.max_size != checkpoint.cluster_size) {
      throw SchemaError("evaluate: clustering size does not match checkpoint");
    }
    const AdGroup* group = nullptr;
    for (const AdGroup& g : dataset.ad_groups) {
      if (g.id == id) group = &g;
    }
    if (group == nullptr) throw SchemaError("evaluate: unknown ad group");

    const std::vector<int> keywords = recommend_keywords(checkpoint, it->second);
    const RewardBreakdown breakdown =
        reward_detailed(world, keywords, group->budget);
    EvalRow row;
    row.adgroup = id;
    row.impressions = breakdown.impressions;
    row.spend = breakdown.spend;
    for (const auto& [kw, marginal] : breakdown.marginals) {
      if (marginal > 0.0) ++row.active_keywords;
    }
    impressions.push_back(row.impressions);
    table.mean_spend += row.spend;
    table.mean_active_keywords += static_cast<Scalar>(row.active_keywords);
    table.rows.push_back(row);
  }
  if (!table.rows.empty()) {
    const Scalar n = static_cast<Scalar>(table.rows.size());
    table.mean_impressions =
        std::accumulate(impressions.begin(), impressions.end(), Scalar(0)) / n;
    table.sd_impressions = population_sd(impressions);
    table.mean_spend /= n;
    table.mean_active_keywords /= n;
  }
  return table;
}

std::string metrics_to_csv(const std::vector<IterationStats>& stats) {
  std::string out = "iter,mean_reward,critic_loss,adv_sd,wall_ms\n";
  for (const IterationStats& s : stats) {
    out += std::to_string(s.iteration);
    out += ',';
    out += format_real(s.mean_reward);
    out += ',';
    out += format_real(s.critic_loss);
    out += ',';
    out += format_real(s.advantage_sd);
    out += ',';
    out += std::to_string(s.wall_ms);
    out += '\n';
  }
  return out;
}

}  // namespace kwrec

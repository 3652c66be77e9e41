// kwrec: budget-aware keyword set selection.
//
// Pipeline: gen-data -> cluster -> train -> recommend / benchmark / sweep.
// Exit codes: 0 success, 1 usage error, 2 data/schema error,
// 3 acceptance-check failure.

#include "kwrec/baselines.hpp"
#include "kwrec/checkpoint.hpp"
#include "kwrec/clustering.hpp"
#include "kwrec/dataset.hpp"
#include "kwrec/gradcheck.hpp"
#include "kwrec/simulator.hpp"
#include "kwrec/text_io.hpp"
#include "kwrec/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <string>
#include <vector>

namespace {

using namespace kwrec;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailed = 3;

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool quiet = false;
};

void say(const GlobalOptions& global, const std::string& message) {
  if (!global.quiet) std::cout << message << "\n";
}

long elapsed_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

const AdGroup& adgroup_by_id(const Dataset& dataset, int id) {
  for (const AdGroup& g : dataset.ad_groups) {
    if (g.id == id) return g;
  }
  throw LookupError("unknown ad group id: " + std::to_string(id));
}

int run_gen_data(const GlobalOptions& global, std::uint64_t seed,
                 int num_keywords, int num_topics, int embedding_dim,
                 int num_adgroups, const std::string& out) {
  const Dataset ds = generate_dataset(seed, num_keywords, num_topics,
                                      embedding_dim, num_adgroups);
  save_dataset(ds, out);
  say(global, "wrote " + std::to_string(ds.keywords.size()) + " keywords, " +
                  std::to_string(ds.ad_groups.size()) + " ad groups to " + out);
  return kExitOk;
}

int run_cluster(const GlobalOptions& global, const std::string& input, int k,
                int max_iters, std::uint64_t seed, const std::string& out) {
  const Dataset ds = load_dataset(input);
  ClusterSet set;
  set.k = k;
  set.max_iters = max_iters;
  set.seed = seed;
  set.feature_dim = ds.feature_dim;
  for (const AdGroup& group : ds.ad_groups) {
    const Matrix features = features_of(ds, group.candidate_ids);
    set.by_adgroup.emplace(
        group.id,
        equal_size_kmeans(features, k, max_iters,
                          mix_seed(seed, static_cast<std::uint64_t>(group.id), 0),
                          &group.candidate_ids));
  }
  save_clusters(set, out);
  say(global, "clustered " + std::to_string(set.by_adgroup.size()) +
                  " ad groups into k=" + std::to_string(k) + " clusters each");
  return kExitOk;
}

int run_train(const GlobalOptions& global, const std::string& data_path,
              const std::string& clusters_path, TrainConfig config,
              const std::string& checkpoint_out, const std::string& metrics_out) {
  const Dataset ds = load_dataset(data_path);
  const ClusterSet clusters = load_clusters(clusters_path);
  const SimWorld world = world_from(ds);
  config.checkpoint_path = checkpoint_out;
  const TrainResult result = train(ds, clusters, world, config);
  save_checkpoint(result.checkpoint, checkpoint_out);
  if (!metrics_out.empty()) {
    write_text_file(metrics_out, metrics_to_csv(result.stats));
  }
  if (!result.stats.empty()) {
    say(global,
        "trained " + std::to_string(config.iterations) +
            " iterations; final mean reward " +
            format_real(result.stats.back().mean_reward));
  }
  say(global, "checkpoint written to " + checkpoint_out);
  return kExitOk;
}

int run_recommend(const GlobalOptions& global, const std::string& data_path,
                  const std::string& clusters_path,
                  const std::string& checkpoint_path, int adgroup_flag,
                  const std::string& out) {
  const Dataset ds = load_dataset(data_path);
  const ClusterSet clusters = load_clusters(clusters_path);
  const Checkpoint cp = load_checkpoint(checkpoint_path);

  std::vector<int> targets;
  if (adgroup_flag >= 0) {
    targets.push_back(adgroup_flag);
  } else {
    targets = split_adgroups(ds).second;
  }

  std::string csv = "adgroup,step,cluster,keyword\n";
  for (int id : targets) {
    auto it = clusters.by_adgroup.find(id);
    if (it == clusters.by_adgroup.end()) {
      throw SchemaError("no clustering for ad group " + std::to_string(id));
    }
    std::vector<int> picked_clusters;
    recommend_keywords(cp, it->second, &picked_clusters);
    for (std::size_t step = 0; step < picked_clusters.size(); ++step) {
      const int cluster_index = picked_clusters[step];
      const Cluster& cluster =
          it->second.clusters[static_cast<std::size_t>(cluster_index)];
      for (int kw : cluster.member_ids) {
        csv += std::to_string(id) + "," + std::to_string(step) + "," +
               std::to_string(cluster_index) + "," + std::to_string(kw) + "\n";
      }
    }
  }
  write_text_file(out, csv);
  say(global, "recommendations written to " + out);
  return kExitOk;
}

struct BenchmarkRow {
  std::string method;
  std::string adgroup;
  Scalar impressions = 0.0;
  Scalar spend = 0.0;
  int active = 0;
  long runtime_ms = 0;
};

int run_benchmark(const GlobalOptions& global, const std::string& data_path,
                  const std::string& clusters_path,
                  const std::string& checkpoint_path,
                  const std::string& methods_csv, int output_size_flag,
                  bool no_timing, const std::string& out) {
  const Dataset ds = load_dataset(data_path);
  const SimWorld world = world_from(ds);

  std::vector<std::string> methods;
  {
    std::string token;
    for (char c : methods_csv + ",") {
      if (c == ',') {
        if (!token.empty()) methods.push_back(token);
        token.clear();
      } else {
        token += c;
      }
    }
  }
  const std::set<std::string> known = {"random", "rb", "pb", "ip", "drl", "brute"};
  for (const std::string& m : methods) {
    if (known.count(m) == 0) {
      throw CLI::ValidationError("--methods", "unknown method: " + m);
    }
  }
  const bool wants_drl =
      std::find(methods.begin(), methods.end(), "drl") != methods.end();
  if (wants_drl && checkpoint_path.empty()) {
    throw CLI::ValidationError("--checkpoint",
                               "method drl requires --checkpoint");
  }

  Checkpoint cp;
  ClusterSet clusters;
  if (!checkpoint_path.empty()) cp = load_checkpoint(checkpoint_path);
  if (!clusters_path.empty()) clusters = load_clusters(clusters_path);

  int k_total = output_size_flag;
  if (!checkpoint_path.empty()) {
    if (k_total > 0 && k_total != cp.output_size) {
      throw CLI::ValidationError(
          "--output-size", "conflicts with checkpoint output_size");
    }
    k_total = cp.output_size;
  }
  if (k_total <= 0) {
    throw CLI::ValidationError("--output-size",
                               "required when no checkpoint is given");
  }

  const std::vector<int> test_ids = split_adgroups(ds).second;
  std::vector<BenchmarkRow> rows;
  for (const std::string& method : methods) {
    for (int id : test_ids) {
      const AdGroup& group = adgroup_by_id(ds, id);
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<int> selection;
      if (method == "random") {
        selection = random_select(group.candidate_ids, k_total,
                                  mix_seed(global.seed, 0x72616e64,
                                           static_cast<std::uint64_t>(id)))
                        .selected;
      } else if (method == "pb") {
        selection = popularity_select(group.candidate_ids, k_total, world).selected;
      } else if (method == "rb") {
        selection = relevance_select(group.candidate_ids, k_total, group, ds)
                        .selected;
      } else if (method == "ip") {
        selection = ip_select(group.candidate_ids, k_total, group.budget, world,
                              group.budget / 1000.0)
                        .selected;
      } else if (method == "brute") {
        selection = brute_force_select(group.candidate_ids, k_total,
                                       group.budget, world,
                                       BruteForceObjective::SimulatorReward)
                        .selected;
      } else {  // drl
        auto it = clusters.by_adgroup.find(id);
        if (it == clusters.by_adgroup.end()) {
          throw SchemaError("no clustering for ad group " + std::to_string(id));
        }
        selection = recommend_keywords(cp, it->second);
      }
      const RewardBreakdown breakdown =
          reward_detailed(world, selection, group.budget);
      BenchmarkRow row;
      row.method = method;
      row.adgroup = std::to_string(id);
      row.impressions = breakdown.impressions;
      row.spend = breakdown.spend;
      for (const auto& [kw, marginal] : breakdown.marginals) {
        if (marginal > 0.0) ++row.active;
      }
      row.runtime_ms = no_timing ? 0 : elapsed_ms(t0);
      rows.push_back(std::move(row));
    }
  }

  std::string csv = "method,adgroup,impressions,spend,n_nonzero_keywords,runtime_ms\n";
  for (const BenchmarkRow& row : rows) {
    csv += csv_field(row.method) + "," + row.adgroup + "," +
           format_real(row.impressions) + "," + format_real(row.spend) + "," +
           std::to_string(row.active) + "," + std::to_string(row.runtime_ms) +
           "\n";
  }
  for (const std::string& method : methods) {
    Scalar mean_impressions = 0.0;
    Scalar mean_spend = 0.0;
    Scalar mean_active = 0.0;
    long total_ms = 0;
    int n = 0;
    for (const BenchmarkRow& row : rows) {
      if (row.method != method) continue;
      mean_impressions += row.impressions;
      mean_spend += row.spend;
      mean_active += row.active;
      total_ms += row.runtime_ms;
      ++n;
    }
    if (n == 0) continue;
    mean_impressions /= n;
    mean_spend /= n;
    mean_active /= n;
    csv += csv_field(method) + ",mean," + format_real(mean_impressions) + "," +
           format_real(mean_spend) + "," + format_real(mean_active) + "," +
           std::to_string(total_ms) + "\n";
  }
  write_text_file(out, csv);
  say(global, "benchmark written to " + out);
  return kExitOk;
}

int run_sweep(const GlobalOptions& global, const std::string& data_path,
              const std::string& sizes_csv, int output_size, int iterations,
              bool no_timing, const std::string& out) {
  const Dataset ds = load_dataset(data_path);
  const SimWorld world = world_from(ds);

  std::vector<int> sizes;
  {
    std::string token;
    for (char c : sizes_csv + ",") {
      if (c == ',') {
        if (!token.empty()) sizes.push_back(std::stoi(token));
        token.clear();
      } else {
        token += c;
      }
    }
  }
  for (int n : sizes) {
    if (n < 1 || output_size % n != 0) {
      throw CLI::ValidationError(
          "--sizes", "cluster size " + std::to_string(n) +
                         " must divide output size " +
                         std::to_string(output_size));
    }
  }

  std::string csv = "n,decode_ms,impressions\n";
  for (int n : sizes) {
    ClusterSet set;
    set.max_iters = 50;
    set.seed = global.seed;
    set.feature_dim = ds.feature_dim;
    for (const AdGroup& group : ds.ad_groups) {
      const int candidates = static_cast<int>(group.candidate_ids.size());
      if (candidates % n != 0) {
        throw CLI::ValidationError(
            "--sizes", "cluster size " + std::to_string(n) +
                           " must divide the candidate count " +
                           std::to_string(candidates));
      }
      const int k = candidates / n;
      set.k = k;
      const Matrix features = features_of(ds, group.candidate_ids);
      set.by_adgroup.emplace(
          group.id,
          equal_size_kmeans(features, k, 50,
                            mix_seed(global.seed,
                                     static_cast<std::uint64_t>(group.id), 0),
                            &group.candidate_ids));
    }

    TrainConfig config;
    config.iterations = iterations;
    config.cluster_size = n;
    config.output_size = output_size;
    config.seed = global.seed;
    config.measure_time = !no_timing;
    const TrainResult result = train(ds, set, world, config);

    // Greedy decode timing over the test split, repeated for a stable read.
    const std::vector<int> test_ids = split_adgroups(ds).second;
    const int reps = 3;
    const auto t0 = std::chrono::steady_clock::now();
    Scalar mean_impressions = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      Scalar total = 0.0;
      for (int id : test_ids) {
        const AdGroup& group = adgroup_by_id(ds, id);
        const std::vector<int> keywords = recommend_keywords(
            result.checkpoint, set.by_adgroup.at(id));
        total += reward(world, keywords, group.budget).first;
      }
      mean_impressions = total / static_cast<Scalar>(test_ids.size());
    }
    const double decode_ms =
        no_timing ? 0.0
                  : static_cast<double>(elapsed_ms(t0)) / static_cast<double>(reps);
    csv += std::to_string(n) + "," + format_real(decode_ms) + "," +
           format_real(mean_impressions) + "\n";
    say(global, "n=" + std::to_string(n) + ": decode " +
                    format_real(decode_ms) + " ms, impressions " +
                    format_real(mean_impressions));
  }
  write_text_file(out, csv);
  say(global, "sweep written to " + out);
  return kExitOk;
}

int run_gradcheck(const GlobalOptions& global, std::uint64_t seed,
                  bool corrupt) {
  const GradAuditReport report = run_gradient_audit(seed, corrupt);
  std::cout << "gradcheck worst relative error: actor "
            << format_real(report.worst_actor_error) << ", critic "
            << format_real(report.worst_critic_error) << "\n";
  if (report.pass) {
    say(global, "gradcheck: PASS");
    return kExitOk;
  }
  std::cout << "gradcheck: FAIL (threshold 1e-4)\n";
  return kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-aware keyword set selection"};
  app.require_subcommand(1);
  // Global flags may be placed after the subcommand name.

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Global seed default");
  app.add_flag("--quiet", global.quiet, "Suppress progress output");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->fallthrough();
  std::uint64_t gen_seed = 0;
  int gen_keywords = 1000;
  int gen_topics = 5;
  int gen_embedding = 8;
  int gen_adgroups = 10;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--num-keywords", gen_keywords, "Total keywords")->required();
  gen->add_option("--num-topics", gen_topics, "Topic centers");
  gen->add_option("--embedding-dim", gen_embedding, "Hidden topic dimension");
  gen->add_option("--num-adgroups", gen_adgroups, "Ad groups")->required();
  gen->add_option("--out", gen_out, "Output dataset path")->required();

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "Equal-size clustering");
  cluster_cmd->fallthrough();
  std::string cluster_input, cluster_out;
  int cluster_k = 0;
  int cluster_iters = 50;
  std::uint64_t cluster_seed = 0;
  cluster_cmd->add_option("--input", cluster_input, "Dataset path")->required();
  cluster_cmd->add_option("--k", cluster_k, "Clusters per ad group")->required();
  cluster_cmd->add_option("--max-iters", cluster_iters, "Max rounds");
  cluster_cmd->add_option("--seed", cluster_seed, "Init seed");
  cluster_cmd->add_option("--out", cluster_out, "Output path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Actor-critic training");
  train_cmd->fallthrough();
  std::string train_data, train_clusters, train_checkpoint, train_metrics;
  TrainConfig train_config;
  bool train_no_timing = false;
  train_cmd->add_option("--data", train_data, "Dataset path")->required();
  train_cmd->add_option("--clusters", train_clusters, "Clusters path")->required();
  train_cmd->add_option("--iterations", train_config.iterations, "Iterations")
      ->required();
  train_cmd->add_option("--batch", train_config.batch_size, "Batch size");
  train_cmd->add_option("--cluster-size", train_config.cluster_size,
                        "Cluster size n");
  train_cmd->add_option("--output-size", train_config.output_size,
                        "Keywords per recommendation")->required();
  train_cmd->add_option("--lr-actor", train_config.lr_actor, "Actor rate");
  train_cmd->add_option("--lr-critic", train_config.lr_critic, "Critic rate");
  train_cmd->add_option("--replay-capacity", train_config.replay_capacity,
                        "Replay capacity");
  train_cmd->add_option("--replay-sample", train_config.replay_sample,
                        "Critic batch from replay");
  train_cmd->add_option("--seed", train_config.seed, "Training seed");
  train_cmd->add_option("--checkpoint-every", train_config.checkpoint_every,
                        "Cadence in iterations (0: final only)");
  train_cmd->add_flag("--no-timing", train_no_timing,
                      "Report wall_ms as 0 for byte-stable metrics");
  train_cmd->add_option("--checkpoint-out", train_checkpoint, "Checkpoint path")
      ->required();
  train_cmd->add_option("--metrics-out", train_metrics, "Metrics CSV path");

  // recommend
  auto* rec = app.add_subcommand("recommend", "Greedy rollout for ad groups");
  rec->fallthrough();
  std::string rec_data, rec_clusters, rec_checkpoint, rec_out;
  int rec_adgroup = -1;
  rec->add_option("--data", rec_data, "Dataset path")->required();
  rec->add_option("--clusters", rec_clusters, "Clusters path")->required();
  rec->add_option("--checkpoint", rec_checkpoint, "Checkpoint path")->required();
  rec->add_option("--adgroup", rec_adgroup,
                  "Ad group id (default: the whole test split)");
  rec->add_option("--out", rec_out, "Output CSV path")->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Compare selection methods");
  bench->fallthrough();
  std::string bench_data, bench_clusters, bench_checkpoint, bench_out;
  std::string bench_methods = "random,rb,pb,ip,drl";
  int bench_output_size = 0;
  bool bench_no_timing = false;
  bench->add_option("--data", bench_data, "Dataset path")->required();
  bench->add_option("--clusters", bench_clusters, "Clusters path (drl)");
  bench->add_option("--checkpoint", bench_checkpoint, "Checkpoint path (drl)");
  bench->add_option("--methods", bench_methods, "Comma-separated methods");
  bench->add_option("--output-size", bench_output_size,
                    "Keywords per recommendation (when no checkpoint)");
  bench->add_flag("--no-timing", bench_no_timing,
                  "Report runtime_ms as 0 for byte-stable reports");
  bench->add_option("--out", bench_out, "Report CSV path")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Cluster-size sweep");
  sweep->fallthrough();
  std::string sweep_data, sweep_sizes = "1,5,10", sweep_out;
  int sweep_output_size = 0;
  int sweep_iterations = 50;
  bool sweep_no_timing = false;
  sweep->add_option("--data", sweep_data, "Dataset path")->required();
  sweep->add_option("--sizes", sweep_sizes, "Comma-separated cluster sizes");
  sweep->add_option("--output-size", sweep_output_size, "Keywords per pick")
      ->required();
  sweep->add_option("--iterations", sweep_iterations, "Brief training length");
  sweep->add_flag("--no-timing", sweep_no_timing, "Report times as 0");
  sweep->add_option("--out", sweep_out, "Output CSV path")->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference audit");
  grad->fallthrough();
  std::uint64_t grad_seed = 0;
  bool grad_corrupt = false;
  grad->add_option("--seed", grad_seed, "Probe seed");
  grad->add_flag("--corrupt-gradient", grad_corrupt, "Negative-control hook")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return run_gen_data(global, gen->count("--seed") ? gen_seed : global.seed,
                          gen_keywords, gen_topics, gen_embedding, gen_adgroups,
                          gen_out);
    }
    if (cluster_cmd->parsed()) {
      return run_cluster(global, cluster_input, cluster_k, cluster_iters,
                         cluster_cmd->count("--seed") ? cluster_seed
                                                      : global.seed,
                         cluster_out);
    }
    if (train_cmd->parsed()) {
      if (train_cmd->count("--seed") == 0) train_config.seed = global.seed;
      train_config.measure_time = !train_no_timing;
      return run_train(global, train_data, train_clusters, train_config,
                       train_checkpoint, train_metrics);
    }
    if (rec->parsed()) {
      return run_recommend(global, rec_data, rec_clusters, rec_checkpoint,
                           rec_adgroup, rec_out);
    }
    if (bench->parsed()) {
      return run_benchmark(global, bench_data, bench_clusters, bench_checkpoint,
                           bench_methods, bench_output_size, bench_no_timing,
                           bench_out);
    }
    if (sweep->parsed()) {
      return run_sweep(global, sweep_data, sweep_sizes, sweep_output_size,
                       sweep_iterations, sweep_no_timing, sweep_out);
    }
    if (grad->parsed()) {
      return run_gradcheck(global, grad->count("--seed") ? grad_seed
                                                         : global.seed,
                           grad_corrupt);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SizeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const LookupError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

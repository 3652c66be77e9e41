#include "kwrec/clustering.hpp"

#include "kwrec/rng.hpp"
#include "kwrec/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace kwrec {

namespace {
using nlohmann::json;
}

Clustering equal_size_kmeans(CRef<Matrix> features, int k, int max_iters,
                             std::uint64_t seed, const std::vector<int>* ids) {
  const Index n_points = features.rows();
  if (k < 1 || static_cast<Index>(k) > n_points) {
    throw ArgumentError("equal_size_kmeans: need 1 <= k <= N, got k=" +
                        std::to_string(k) + ", N=" + std::to_string(n_points));
  }
  if (max_iters < 1) {
    throw ArgumentError("equal_size_kmeans: max_iters must be >= 1");
  }
  if (!features.allFinite()) {
    throw ArgumentError("equal_size_kmeans: features must be finite");
  }
  if (ids != nullptr && static_cast<Index>(ids->size()) != n_points) {
    throw ArgumentError("equal_size_kmeans: ids length must match rows");
  }

  const int capacity = static_cast<int>(
      (n_points + static_cast<Index>(k) - 1) / static_cast<Index>(k));

  // Points are visited in ascending id order.
  std::vector<Index> order(static_cast<std::size_t>(n_points));
  std::iota(order.begin(), order.end(), Index{0});
  if (ids != nullptr) {
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      return (*ids)[static_cast<std::size_t>(a)] <
             (*ids)[static_cast<std::size_t>(b)];
    });
  }

  Rng rng(seed);
  const std::vector<int> init_rows =
      rng.sample_without_replacement(static_cast<int>(n_points), k);
  Matrix centers(k, features.cols());
  for (int c = 0; c < k; ++c) {
    centers.row(c) = features.row(init_rows[static_cast<std::size_t>(c)]);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n_points), -1);
  std::vector<int> previous;
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  int rounds = 0;

  for (int round = 1; round <= max_iters; ++round) {
    rounds = round;
    std::fill(sizes.begin(), sizes.end(), 0);
    for (Index pos : order) {
      int best = -1;
      Scalar best_dist = std::numeric_limits<Scalar>::infinity();
      for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] >= capacity) continue;
        const Scalar dist =
            (features.row(pos) - centers.row(c)).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      assignment[static_cast<std::size_t>(pos)] = best;
      ++sizes[static_cast<std::size_t>(best)];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) continue;  // keep center
      Vector mean = Vector::Zero(features.cols());
      for (Index p = 0; p < n_points; ++p) {
        if (assignment[static_cast<std::size_t>(p)] == c) {
          mean += features.row(p).transpose();
        }
      }
      centers.row(c) =
          (mean / static_cast<Scalar>(sizes[static_cast<std::size_t>(c)]))
              .transpose();
    }
    if (assignment == previous) break;
    previous = assignment;
  }

  Clustering result;
  result.max_size = capacity;
  result.rounds_used = rounds;
  result.clusters.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    result.clusters[static_cast<std::size_t>(c)].centroid =
        centers.row(c).transpose();
  }
  for (Index pos : order) {
    const int c = assignment[static_cast<std::size_t>(pos)];
    const int id =
        ids != nullptr ? (*ids)[static_cast<std::size_t>(pos)]
                       : static_cast<int>(pos);
    result.clusters[static_cast<std::size_t>(c)].member_ids.push_back(id);
  }
  return result;
}

Matrix centroids(const Clustering& clustering) {
  if (clustering.clusters.empty()) {
    throw ArgumentError("centroids: empty clustering");
  }
  const Index d = clustering.clusters.front().centroid.size();
  Matrix out(static_cast<Index>(clustering.clusters.size()), d);
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    out.row(static_cast<Index>(c)) =
        clustering.clusters[c].centroid.transpose();
  }
  return out;
}

std::vector<int> expand(const Clustering& clustering,
                        const std::vector<int>& selected_clusters) {
  std::set<int> seen;
  std::vector<int> out;
  for (int c : selected_clusters) {
    if (c < 0 || static_cast<std::size_t>(c) >= clustering.clusters.size()) {
      throw ArgumentError("expand: cluster index out of range: " +
                          std::to_string(c));
    }
    if (!seen.insert(c).second) {
      throw ArgumentError("expand: duplicate cluster index: " +
                          std::to_string(c));
    }
    const auto& members = clustering.clusters[static_cast<std::size_t>(c)].member_ids;
    out.insert(out.end(), members.begin(), members.end());
  }
  return out;
}

void save_clusters(const ClusterSet& clusters, const std::string& path) {
  std::string out;
  json header;
  header["version"] = 1;
  header["kind"] = "clusters";
  header["k"] = clusters.k;
  header["max_iters"] = clusters.max_iters;
  header["seed"] = clusters.seed;
  header["feature_dim"] = clusters.feature_dim;
  header["num_adgroups"] = clusters.by_adgroup.size();
  out += header.dump();
  out += '\n';
  for (const auto& [adgroup, clustering] : clusters.by_adgroup) {
    out += "{\"adgroup\":" + std::to_string(adgroup);
    out += ",\"max_size\":" + std::to_string(clustering.max_size);
    out += ",\"rounds\":" + std::to_string(clustering.rounds_used);
    out += ",\"num_clusters\":" + std::to_string(clustering.clusters.size());
    out += "}\n";
    for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
      const Cluster& cluster = clustering.clusters[c];
      out += "{\"adgroup\":" + std::to_string(adgroup);
      out += ",\"cluster\":" + std::to_string(c);
      out += ",\"centroid\":[" + format_real_list(cluster.centroid) + "]";
      out += ",\"members\":" + json(cluster.member_ids).dump() + "}\n";
    }
  }
  write_text_file(path, out);
}

ClusterSet load_clusters(const std::string& path) {
  const std::vector<std::string> lines = read_all_lines(path);
  if (lines.empty()) throw ParseError("empty cluster file", 1);
  const auto parse_line = [&](std::size_t i) -> json {
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      throw ParseError("malformed record", static_cast<long>(i + 1));
    }
    return j;
  };
  const json header = parse_line(0);
  if (!header.contains("version") || header["version"] != 1 ||
      header.value("kind", "") != std::string("clusters")) {
    throw SchemaError("clusters: unsupported header");
  }
  ClusterSet set;
  set.k = header.at("k").get<int>();
  set.max_iters = header.at("max_iters").get<int>();
  set.seed = header.at("seed").get<std::uint64_t>();
  set.feature_dim = header.at("feature_dim").get<Index>();
  const std::size_t num_adgroups = header.at("num_adgroups").get<std::size_t>();

  std::size_t line = 1;
  for (std::size_t a = 0; a < num_adgroups; ++a) {
    if (line >= lines.size()) {
      throw ParseError("file truncated", static_cast<long>(lines.size()));
    }
    const json g = parse_line(line++);
    Clustering clustering;
    const int adgroup = g.at("adgroup").get<int>();
    clustering.max_size = g.at("max_size").get<int>();
    clustering.rounds_used = g.at("rounds").get<int>();
    const std::size_t num_clusters = g.at("num_clusters").get<std::size_t>();
    clustering.clusters.resize(num_clusters);
    for (std::size_t c = 0; c < num_clusters; ++c) {
      if (line >= lines.size()) {
        throw ParseError("file truncated", static_cast<long>(lines.size()));
      }
      const json j = parse_line(line++);
      if (j.at("cluster").get<std::size_t>() != c) {
        throw SchemaError("clusters: out-of-order cluster records");
      }
      Cluster& cluster = clustering.clusters[c];
      const auto& arr = j.at("centroid");
      cluster.centroid = Vector(arr.size());
      Index i = 0;
      for (const auto& x : arr) cluster.centroid(i++) = x.get<Scalar>();
      if (cluster.centroid.size() != set.feature_dim) {
        throw SchemaError("clusters: centroid dimension mismatch");
      }
      cluster.member_ids = j.at("members").get<std::vector<int>>();
    }
    set.by_adgroup.emplace(adgroup, std::move(clustering));
  }
  return set;
}

}  // namespace kwrec

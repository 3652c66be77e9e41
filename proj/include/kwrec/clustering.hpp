#pragma once

#include "kwrec/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kwrec {

struct Cluster {
  std::vector<int> member_ids;  // ascending id order
  Vector centroid;
};

/// Near-equal-size partition of a candidate set; the actor's action space.
struct Clustering {
  std::vector<Cluster> clusters;
  int max_size = 0;     // ceil(N / k)
  int rounds_used = 0;  // assign/update rounds until convergence or cap
};

/// Size-capped k-means: points are assigned in ascending id order to the
/// nearest (squared Euclidean) cluster that is not yet full; distance ties
/// break toward the lowest cluster index. Initial centers are k distinct
/// input rows sampled with `seed`. Stops when the assignment is unchanged
/// between rounds, or after max_iters rounds.
Clustering equal_size_kmeans(CRef<Matrix> features, int k, int max_iters,
                             std::uint64_t seed,
                             const std::vector<int>* ids = nullptr);

/// Row i is cluster i's centroid.
Matrix centroids(const Clustering& clustering);

/// Member ids of the selected clusters, concatenated in selection order.
std::vector<int> expand(const Clustering& clustering,
                        const std::vector<int>& selected_clusters);

/// Per-ad-group clusterings plus the settings they were built with.
struct ClusterSet {
  int k = 0;
  int max_iters = 0;
  std::uint64_t seed = 0;
  Index feature_dim = 0;
  std::map<int, Clustering> by_adgroup;
};

void save_clusters(const ClusterSet& clusters, const std::string& path);
ClusterSet load_clusters(const std::string& path);

}  // namespace kwrec

#include "kwrec/clustering.hpp"

#include "kwrec/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

using namespace kwrec;

TEST_SUITE_BEGIN("clustering");

namespace {

std::set<std::set<int>> as_partition(const Clustering& clustering) {
  std::set<std::set<int>> partition;
  for (const Cluster& c : clustering.clusters) {
    if (!c.member_ids.empty()) {
      partition.insert(std::set<int>(c.member_ids.begin(), c.member_ids.end()));
    }
  }
  return partition;
}

// Independent oracle: enumerate every balanced 2-partition of four 1-D
// points and keep the one with minimal within-cluster squared error.
std::set<std::set<int>> best_balanced_2partition(const Vector& points) {
  std::set<std::set<int>> best;
  Scalar best_sse = std::numeric_limits<Scalar>::infinity();
  const int n = static_cast<int>(points.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      std::set<int> left = {a, b};
      std::set<int> right;
      for (int i = 0; i < n; ++i) {
        if (left.count(i) == 0) right.insert(i);
      }
      const auto sse = [&](const std::set<int>& cluster) {
        Scalar mean = 0.0;
        for (int i : cluster) mean += points(i);
        mean /= static_cast<Scalar>(cluster.size());
        Scalar total = 0.0;
        for (int i : cluster) total += (points(i) - mean) * (points(i) - mean);
        return total;
      };
      const Scalar total = sse(left) + sse(right);
      if (total < best_sse) {
        best_sse = total;
        best = {left, right};
      }
    }
  }
  return best;
}

void check_invariants(const Clustering& clustering, int n, int k) {
  CHECK(clustering.max_size == (n + k - 1) / k);
  CHECK(static_cast<int>(clustering.clusters.size()) == k);
  std::set<int> seen;
  int total = 0;
  for (const Cluster& c : clustering.clusters) {
    CHECK(static_cast<int>(c.member_ids.size()) <= clustering.max_size);
    total += static_cast<int>(c.member_ids.size());
    for (int id : c.member_ids) CHECK(seen.insert(id).second);
  }
  CHECK(total == n);
}

}  // namespace

TEST_CASE("size cap follows ceil(N/k)") {
  Rng rng(3);
  Matrix features(7, 2);
  for (Index r = 0; r < 7; ++r) {
    features(r, 0) = rng.uniform(-1, 1);
    features(r, 1) = rng.uniform(-1, 1);
  }
  const Clustering c = equal_size_kmeans(features, 3, 50, 0);
  CHECK(c.max_size == 3);
  check_invariants(c, 7, 3);
}

TEST_CASE("two well-separated pairs in 1-D are recovered for any seed") {
  Matrix features(4, 1);
  features << 0.0, 0.1, 10.0, 10.1;
  const auto expected = best_balanced_2partition(features.col(0));
  CHECK(expected ==
        std::set<std::set<int>>{{0, 1}, {2, 3}});  // oracle sanity
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Clustering c = equal_size_kmeans(features, 2, 50, seed);
    CHECK(as_partition(c) == expected);
  }
}

TEST_CASE("identical points split into ceil/floor halves") {
  for (int n : {6, 7, 11}) {
    Matrix features = Matrix::Constant(n, 3, 2.5);
    const Clustering c = equal_size_kmeans(features, 2, 50, 1);
    std::vector<std::size_t> sizes;
    for (const Cluster& cl : c.clusters) sizes.push_back(cl.member_ids.size());
    std::sort(sizes.rbegin(), sizes.rend());
    CHECK(sizes[0] == static_cast<std::size_t>((n + 1) / 2));
    CHECK(sizes[1] == static_cast<std::size_t>(n / 2));
  }
}

TEST_CASE("argument errors: k out of range, bad features") {
  Matrix features = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(equal_size_kmeans(features, 4, 50, 0), ArgumentError);
  CHECK_THROWS_AS(equal_size_kmeans(features, 0, 50, 0), ArgumentError);
  CHECK_THROWS_AS(equal_size_kmeans(features, 2, 0, 0), ArgumentError);
  features(1, 1) = std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(equal_size_kmeans(features, 2, 50, 0), ArgumentError);
}

TEST_CASE("centroids: mean, identity for singletons, invariant restatement") {
  SUBCASE("single cluster of two points averages them") {
    Matrix features(2, 2);
    features << 0.0, 0.0, 2.0, 2.0;
    const Clustering c = equal_size_kmeans(features, 1, 10, 0);
    const Matrix m = centroids(c);
    CHECK(m(0, 0) == doctest::Approx(1.0));
    CHECK(m(0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("singleton clusters sit on their members") {
    Matrix features(3, 1);
    features << -4.0, 0.0, 4.0;
    const Clustering c = equal_size_kmeans(features, 3, 10, 5);
    for (const Cluster& cl : c.clusters) {
      REQUIRE(cl.member_ids.size() == 1);
      CHECK(cl.centroid(0) == features(cl.member_ids[0], 0));
    }
  }
  SUBCASE("stored centroid equals the recomputed member mean") {
    Rng rng(12);
    Matrix features(20, 3);
    for (Index r = 0; r < features.rows(); ++r) {
      for (Index col = 0; col < 3; ++col) {
        features(r, col) = rng.normal(0, 1);
      }
    }
    const Clustering c = equal_size_kmeans(features, 4, 50, 2);
    for (const Cluster& cl : c.clusters) {
      if (cl.member_ids.empty()) continue;
      Vector mean = Vector::Zero(3);
      for (int id : cl.member_ids) mean += features.row(id).transpose();
      mean /= static_cast<Scalar>(cl.member_ids.size());
      CHECK((cl.centroid - mean).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("expand: order-preserving concatenation and errors") {
  Clustering clustering;
  clustering.max_size = 2;
  clustering.clusters.resize(3);
  clustering.clusters[0].member_ids = {10, 11};
  clustering.clusters[1].member_ids = {20};
  clustering.clusters[2].member_ids = {30, 31};

  CHECK(expand(clustering, {2, 0}) == std::vector<int>{30, 31, 10, 11});
  CHECK(expand(clustering, {}) == std::vector<int>{});
  const std::vector<int> all = expand(clustering, {0, 1, 2});
  CHECK(all.size() == 5);
  CHECK(std::set<int>(all.begin(), all.end()).size() == 5);
  CHECK_THROWS_AS(expand(clustering, {0, 0}), ArgumentError);
  CHECK_THROWS_AS(expand(clustering, {3}), ArgumentError);
}

TEST_CASE("property: partition, size cap, determinism, termination") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + rng.uniform_int(40);
    const int k = 1 + rng.uniform_int(n);
    const int max_iters = 1 + rng.uniform_int(20);
    const std::uint64_t seed = rng.next_u64();
    Matrix features(n, 2);
    for (Index r = 0; r < n; ++r) {
      features(r, 0) = rng.normal(0, 1);
      features(r, 1) = rng.normal(0, 1);
    }
    const Clustering a = equal_size_kmeans(features, k, max_iters, seed);
    check_invariants(a, n, k);
    CHECK(a.rounds_used <= max_iters);
    const Clustering b = equal_size_kmeans(features, k, max_iters, seed);
    CHECK(as_partition(a) == as_partition(b));
    CHECK(centroids(a) == centroids(b));
  }
}

TEST_CASE("cluster set round trip") {
  const int n = 12, k = 3;
  Rng rng(5);
  Matrix features(n, 2);
  for (Index r = 0; r < n; ++r) {
    features(r, 0) = rng.normal(0, 1);
    features(r, 1) = rng.normal(0, 1);
  }
  std::vector<int> ids;
  for (int i = 0; i < n; ++i) ids.push_back(100 + i);
  ClusterSet set;
  set.k = k;
  set.max_iters = 50;
  set.seed = 9;
  set.feature_dim = 2;
  set.by_adgroup.emplace(0, equal_size_kmeans(features, k, 50, 9, &ids));

  const auto path =
      std::filesystem::temp_directory_path() / "kwrec_clusters_roundtrip.jsonl";
  save_clusters(set, path.string());
  const ClusterSet loaded = load_clusters(path.string());
  std::filesystem::remove(path);
  CHECK(loaded.k == k);
  CHECK(loaded.feature_dim == 2);
  const Clustering& a = set.by_adgroup.at(0);
  const Clustering& b = loaded.by_adgroup.at(0);
  CHECK(a.max_size == b.max_size);
  REQUIRE(a.clusters.size() == b.clusters.size());
  for (std::size_t c = 0; c < a.clusters.size(); ++c) {
    CHECK(a.clusters[c].member_ids == b.clusters[c].member_ids);
    CHECK(a.clusters[c].centroid == b.clusters[c].centroid);
  }
}

TEST_SUITE_END();

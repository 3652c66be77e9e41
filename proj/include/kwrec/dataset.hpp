#pragma once

#include "kwrec/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kwrec {

/// One candidate keyword. `features` is what models observe (standardized
/// over the dataset); the latents drive the auction simulator and are
/// hidden from the policy.
struct KeywordRecord {
  int id = 0;
  Vector features;
  Scalar latent_volume = 0.0;  // hidden daily matched-query count
  Scalar latent_ctr = 0.0;     // in (0, 1]
  Scalar latent_cpc = 0.0;     // market cost per click
  Vector embedding;            // hidden topic position, unit norm
};

struct AdGroup {
  int id = 0;
  Scalar budget = 0.0;  // currency per evaluation window
  Scalar bid = 0.0;
  std::vector<int> existing_ids;
  std::vector<int> candidate_ids;
};

struct Dataset {
  std::map<int, KeywordRecord> keywords;
  std::vector<AdGroup> ad_groups;
  Index feature_dim = 0;
  Index embedding_dim = 0;
  std::uint64_t seed = 0;
};

/// Seeded synthetic corpus. Embeddings come from `num_topics` unit-norm
/// topic centers with angular noise; volumes are log-normal; CPC rises
/// with volume (popular keywords attract more bidders); features are
/// noisy observations of the latents plus the embedding, standardized
/// per dimension over the whole dataset. Pure function of its arguments.
Dataset generate_dataset(std::uint64_t seed, int num_keywords, int num_topics,
                         int embedding_dim, int num_adgroups);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_string(const Dataset& dataset);
Dataset dataset_from_lines(const std::vector<std::string>& lines);

struct Standardization {
  Vector mean;
  Vector sd;
};

/// Column-wise (x - mean) / sd with population standard deviation.
/// Constant columns map to all-zero with recorded sd = 1.
std::pair<Matrix, Standardization> standardize(const Matrix& features);

/// Checks every dataset invariant; throws SchemaError on violation.
void validate(const Dataset& dataset);

/// Deterministic 80/20 ad-group split, seeded by the dataset seed so every
/// command sees the same test set. Returns (train ids, test ids).
std::pair<std::vector<int>, std::vector<int>> split_adgroups(
    const Dataset& dataset);

/// Feature matrix for a list of keyword ids, one row per id.
Matrix features_of(const Dataset& dataset, const std::vector<int>& ids);

}  // namespace kwrec

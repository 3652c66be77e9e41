#include "kwrec/dataset.hpp"

#include "kwrec/rng.hpp"
#include "kwrec/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace kwrec {

namespace {

using nlohmann::json;

constexpr Scalar kAngularNoise = 0.18;
constexpr Scalar kObsNoiseSigma = 0.1;
constexpr Scalar kVolumeLogMean = 4.605170185988092;  // log(100)
constexpr Scalar kVolumeLogSd = 0.8;
// Popularity varies by topic: fashionable topics draw more queries, so
// topic membership is informative about value, as it is in search logs.
constexpr Scalar kTopicVolumeSpread = 1.6;
constexpr Scalar kCtrLogMean = -3.2188758248682006;  // log(0.04)
constexpr Scalar kCtrLogSd = 0.4;
constexpr Scalar kCpcBase = 0.1;
constexpr Scalar kCpcVolumeExponent = 0.5;  // popularity drives up cost
constexpr Scalar kCpcNoiseSigma = 0.3;
constexpr Scalar kMainTopicShare = 0.7;
constexpr Scalar kExistingShare = 0.2;
constexpr Scalar kBudgetShare = 0.3;

Vector unit_vector(Vector v) {
  const Scalar norm = v.norm();
  if (norm < 1e-12) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

Vector random_unit(Rng& rng, Index dim) {
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.normal(0.0, 1.0);
  return unit_vector(std::move(v));
}

}  // namespace

std::pair<Matrix, Standardization> standardize(const Matrix& features) {
  if (features.rows() < 2) {
    throw ArgumentError("standardize requires at least 2 rows");
  }
  const Index n = features.rows();
  const Index d = features.cols();
  Standardization stats;
  stats.mean = features.colwise().mean();
  stats.sd = Vector(d);
  Matrix out(n, d);
  for (Index c = 0; c < d; ++c) {
    const Scalar mean = stats.mean(c);
    Scalar var = 0.0;
    for (Index r = 0; r < n; ++r) {
      const Scalar delta = features(r, c) - mean;
      var += delta * delta;
    }
    const Scalar sd = std::sqrt(var / static_cast<Scalar>(n));
    if (sd <= 1e-12 * (1.0 + std::abs(mean))) {
      stats.sd(c) = 1.0;
      out.col(c).setZero();
    } else {
      stats.sd(c) = sd;
      out.col(c) = (features.col(c).array() - mean) / sd;
    }
  }
  return {std::move(out), std::move(stats)};
}

Dataset generate_dataset(std::uint64_t seed, int num_keywords, int num_topics,
                         int embedding_dim, int num_adgroups) {
  if (num_topics < 1 || num_keywords < num_topics) {
    throw ArgumentError("generate_dataset: need num_keywords >= num_topics >= 1");
  }
  if (embedding_dim < 2) {
    throw ArgumentError("generate_dataset: embedding_dim must be >= 2");
  }
  if (num_adgroups < 1 || num_keywords < 2 * num_adgroups) {
    throw ArgumentError(
        "generate_dataset: each ad group needs at least 2 keywords");
  }

  Rng rng(mix_seed(seed, 0x6765, 0));
  Dataset ds;
  ds.seed = seed;
  ds.embedding_dim = embedding_dim;

  std::vector<Vector> topic_centers;
  topic_centers.reserve(static_cast<std::size_t>(num_topics));
  for (int t = 0; t < num_topics; ++t) {
    topic_centers.push_back(random_unit(rng, embedding_dim));
  }

  struct GroupPlan {
    int main_topic;
    Scalar bid;
    std::vector<int> keyword_ids;
  };
  std::vector<GroupPlan> plans(static_cast<std::size_t>(num_adgroups));
  for (int a = 0; a < num_adgroups; ++a) {
    plans[static_cast<std::size_t>(a)].main_topic = a % num_topics;
    plans[static_cast<std::size_t>(a)].bid = rng.uniform(0.5, 2.5);
  }

  // Keywords are dealt to ad groups in contiguous id ranges; the first
  // (num_keywords % num_adgroups) groups absorb the remainder.
  int next_id = 0;
  for (int a = 0; a < num_adgroups; ++a) {
    int count = num_keywords / num_adgroups;
    if (a < num_keywords % num_adgroups) ++count;
    GroupPlan& plan = plans[static_cast<std::size_t>(a)];
    for (int i = 0; i < count; ++i) plan.keyword_ids.push_back(next_id++);
  }

  for (int a = 0; a < num_adgroups; ++a) {
    const GroupPlan& plan = plans[static_cast<std::size_t>(a)];
    for (int id : plan.keyword_ids) {
      KeywordRecord rec;
      rec.id = id;
      int topic = plan.main_topic;
      if (rng.uniform01() >= kMainTopicShare) topic = rng.uniform_int(num_topics);
      Vector noise(embedding_dim);
      for (Index i = 0; i < embedding_dim; ++i) {
        noise(i) = rng.normal(0.0, kAngularNoise);
      }
      rec.embedding = unit_vector(
          topic_centers[static_cast<std::size_t>(topic)] + noise);
      const Scalar topic_boost =
          num_topics == 1
              ? 0.0
              : kTopicVolumeSpread * (static_cast<Scalar>(topic) /
                                          static_cast<Scalar>(num_topics - 1) -
                                      0.5);
      rec.latent_volume =
          rng.lognormal(kVolumeLogMean + topic_boost, kVolumeLogSd);
      rec.latent_ctr = std::min(1.0, rng.lognormal(kCtrLogMean, kCtrLogSd));
      rec.latent_cpc = kCpcBase *
                       std::pow(rec.latent_volume, kCpcVolumeExponent) *
                       rng.lognormal(0.0, kCpcNoiseSigma);
      ds.keywords.emplace(id, std::move(rec));
    }
  }

  // Existing/candidate split and group relevance centers.
  for (int a = 0; a < num_adgroups; ++a) {
    const GroupPlan& plan = plans[static_cast<std::size_t>(a)];
    const int count = static_cast<int>(plan.keyword_ids.size());
    int n_existing = std::max(
        1, static_cast<int>(std::lround(kExistingShare * count)));
    n_existing = std::min(n_existing, count - 1);
    AdGroup group;
    group.id = a;
    group.bid = plan.bid;
    for (int i = 0; i < count; ++i) {
      if (i < n_existing) {
        group.existing_ids.push_back(plan.keyword_ids[static_cast<std::size_t>(i)]);
      } else {
        group.candidate_ids.push_back(plan.keyword_ids[static_cast<std::size_t>(i)]);
      }
    }
    ds.ad_groups.push_back(std::move(group));
  }

  // Raw features: noisy log-volume, noisy log-cpc, ctr, bid, relevance to
  // the ad group's existing keywords, then the topic embedding.
  const Index feat_dim = 5 + embedding_dim;
  Matrix raw(num_keywords, feat_dim);
  for (int a = 0; a < num_adgroups; ++a) {
    const GroupPlan& plan = plans[static_cast<std::size_t>(a)];
    const AdGroup& group = ds.ad_groups[static_cast<std::size_t>(a)];
    Vector center = Vector::Zero(embedding_dim);
    for (int id : group.existing_ids) center += ds.keywords.at(id).embedding;
    center = unit_vector(std::move(center));
    for (int id : plan.keyword_ids) {
      const KeywordRecord& rec = ds.keywords.at(id);
      raw(id, 0) = std::log1p(rec.latent_volume) *
                   rng.lognormal(0.0, kObsNoiseSigma);
      raw(id, 1) = std::log(rec.latent_cpc) * rng.lognormal(0.0, kObsNoiseSigma);
      raw(id, 2) = rec.latent_ctr;
      raw(id, 3) = group.bid;
      raw(id, 4) = rec.embedding.dot(center);
      raw.row(id).segment(5, embedding_dim) = rec.embedding.transpose();
    }
  }
  auto [standardized, stats] = standardize(raw);
  (void)stats;
  ds.feature_dim = feat_dim;
  for (auto& [id, rec] : ds.keywords) {
    rec.features = standardized.row(id).transpose();
  }

  // Budget: a fixed share of the candidates' standalone spend, so naive
  // popularity selection overshoots it.
  for (AdGroup& group : ds.ad_groups) {
    Scalar total_cost = 0.0;
    for (int id : group.candidate_ids) {
      const KeywordRecord& rec = ds.keywords.at(id);
      total_cost += rec.latent_volume * rec.latent_ctr * rec.latent_cpc;
    }
    group.budget = kBudgetShare * total_cost;
  }

  validate(ds);
  return ds;
}

void validate(const Dataset& ds) {
  if (ds.feature_dim <= 0) throw SchemaError("dataset: feature_dim must be positive");
  std::set<int> seen;
  for (const auto& [id, rec] : ds.keywords) {
    if (id != rec.id || id < 0) throw SchemaError("dataset: bad keyword id");
    if (!seen.insert(id).second) throw SchemaError("dataset: duplicate keyword id");
    if (rec.features.size() != ds.feature_dim) {
      throw SchemaError("dataset: feature dimension mismatch for keyword " +
                        std::to_string(id));
    }
    if (rec.embedding.size() != ds.embedding_dim) {
      throw SchemaError("dataset: embedding dimension mismatch for keyword " +
                        std::to_string(id));
    }
    if (!(rec.latent_volume >= 0.0) || !std::isfinite(rec.latent_volume)) {
      throw SchemaError("dataset: latent_volume must be >= 0");
    }
    if (!(rec.latent_ctr > 0.0 && rec.latent_ctr <= 1.0)) {
      throw SchemaError("dataset: latent_ctr must be in (0,1]");
    }
    if (!(rec.latent_cpc > 0.0)) throw SchemaError("dataset: latent_cpc must be > 0");
    if (std::abs(rec.embedding.norm() - 1.0) > 1e-9) {
      throw SchemaError("dataset: embedding must have unit norm");
    }
  }
  for (const AdGroup& group : ds.ad_groups) {
    if (!(group.budget > 0.0)) throw SchemaError("dataset: budget must be > 0");
    if (!(group.bid > 0.0)) throw SchemaError("dataset: bid must be > 0");
    if (group.candidate_ids.empty()) {
      throw SchemaError("dataset: ad group has no candidates");
    }
    std::set<int> existing(group.existing_ids.begin(), group.existing_ids.end());
    std::set<int> candidates(group.candidate_ids.begin(),
                             group.candidate_ids.end());
    if (candidates.size() != group.candidate_ids.size()) {
      throw SchemaError("dataset: duplicate candidate ids");
    }
    for (int id : group.candidate_ids) {
      if (existing.count(id) > 0) {
        throw SchemaError("dataset: candidate also listed as existing");
      }
    }
    for (int id : group.existing_ids) {
      if (ds.keywords.count(id) == 0) {
        throw SchemaError("dataset: existing id not in keyword table");
      }
    }
    for (int id : group.candidate_ids) {
      if (ds.keywords.count(id) == 0) {
        throw SchemaError("dataset: candidate id not in keyword table");
      }
    }
  }
}

std::string dataset_to_string(const Dataset& ds) {
  std::string out;
  json header;
  header["version"] = 1;
  header["feature_dim"] = ds.feature_dim;
  header["d_e"] = ds.embedding_dim;
  header["seed"] = ds.seed;
  header["num_keywords"] = ds.keywords.size();
  header["num_adgroups"] = ds.ad_groups.size();
  out += header.dump();
  out += '\n';
  for (const auto& [id, rec] : ds.keywords) {
    out += "{\"id\":" + std::to_string(id);
    out += ",\"features\":[" + format_real_list(rec.features) + "]";
    out += ",\"volume\":" + format_real(rec.latent_volume);
    out += ",\"ctr\":" + format_real(rec.latent_ctr);
    out += ",\"cpc\":" + format_real(rec.latent_cpc);
    out += ",\"embedding\":[" + format_real_list(rec.embedding) + "]}\n";
  }
  for (const AdGroup& group : ds.ad_groups) {
    out += "{\"adgroup\":" + std::to_string(group.id);
    out += ",\"budget\":" + format_real(group.budget);
    out += ",\"bid\":" + format_real(group.bid);
    out += ",\"existing\":" + json(group.existing_ids).dump();
    out += ",\"candidates\":" + json(group.candidate_ids).dump() + "}\n";
  }
  return out;
}

Dataset dataset_from_lines(const std::vector<std::string>& lines) {
  if (lines.empty()) throw ParseError("empty dataset file", 1);
  const auto parse_line = [&](std::size_t i) -> json {
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      throw ParseError("malformed record", static_cast<long>(i + 1));
    }
    return j;
  };

  const json header = parse_line(0);
  if (!header.contains("version") || header["version"] != 1) {
    throw SchemaError("dataset: unsupported version");
  }
  Dataset ds;
  ds.feature_dim = header.at("feature_dim").get<Index>();
  ds.embedding_dim = header.at("d_e").get<Index>();
  ds.seed = header.at("seed").get<std::uint64_t>();
  const std::size_t num_keywords = header.at("num_keywords").get<std::size_t>();
  const std::size_t num_adgroups = header.at("num_adgroups").get<std::size_t>();
  if (lines.size() < 1 + num_keywords + num_adgroups) {
    throw ParseError("file truncated: expected " +
                         std::to_string(1 + num_keywords + num_adgroups) +
                         " lines, found " + std::to_string(lines.size()),
                     static_cast<long>(lines.size()));
  }

  const auto to_vector = [](const json& arr) {
    Vector v(arr.size());
    Index i = 0;
    for (const auto& x : arr) v(i++) = x.get<Scalar>();
    return v;
  };

  for (std::size_t i = 0; i < num_keywords; ++i) {
    const std::size_t line_no = 1 + i;
    const json j = parse_line(line_no);
    KeywordRecord rec;
    try {
      rec.id = j.at("id").get<int>();
      rec.features = to_vector(j.at("features"));
      rec.latent_volume = j.at("volume").get<Scalar>();
      rec.latent_ctr = j.at("ctr").get<Scalar>();
      rec.latent_cpc = j.at("cpc").get<Scalar>();
      rec.embedding = to_vector(j.at("embedding"));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad keyword record: ") + e.what(),
                       static_cast<long>(line_no + 1));
    }
    if (rec.features.size() != ds.feature_dim) {
      throw SchemaError("dataset: record feature_dim " +
                        std::to_string(rec.features.size()) +
                        " does not match header " +
                        std::to_string(ds.feature_dim));
    }
    ds.keywords.emplace(rec.id, std::move(rec));
  }
  for (std::size_t i = 0; i < num_adgroups; ++i) {
    const std::size_t line_no = 1 + num_keywords + i;
    const json j = parse_line(line_no);
    AdGroup group;
    try {
      group.id = j.at("adgroup").get<int>();
      group.budget = j.at("budget").get<Scalar>();
      group.bid = j.at("bid").get<Scalar>();
      group.existing_ids = j.at("existing").get<std::vector<int>>();
      group.candidate_ids = j.at("candidates").get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad ad group record: ") + e.what(),
                       static_cast<long>(line_no + 1));
    }
    ds.ad_groups.push_back(std::move(group));
  }
  validate(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  write_text_file(path, dataset_to_string(ds));
}

Dataset load_dataset(const std::string& path) {
  return dataset_from_lines(read_all_lines(path));
}

std::pair<std::vector<int>, std::vector<int>> split_adgroups(
    const Dataset& ds) {
  std::vector<int> ids;
  ids.reserve(ds.ad_groups.size());
  for (const AdGroup& g : ds.ad_groups) ids.push_back(g.id);
  if (ids.size() == 1) return {ids, ids};
  Rng rng(mix_seed(ds.seed, 0x73706c69, 0x74));
  rng.shuffle(ids);
  const auto n = static_cast<std::size_t>(ids.size());
  std::size_t n_train = static_cast<std::size_t>(
      std::lround(0.8 * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<int> train(ids.begin(), ids.begin() + static_cast<long>(n_train));
  std::vector<int> test(ids.begin() + static_cast<long>(n_train), ids.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

Matrix features_of(const Dataset& ds, const std::vector<int>& ids) {
  Matrix out(static_cast<Index>(ids.size()), ds.feature_dim);
  Index r = 0;
  for (int id : ids) {
    auto it = ds.keywords.find(id);
    if (it == ds.keywords.end()) {
      throw LookupError("unknown keyword id: " + std::to_string(id));
    }
    out.row(r++) = it->second.features.transpose();
  }
  return out;
}

}  // namespace kwrec

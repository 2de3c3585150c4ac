#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mamo/data.hpp"
#include "mamo/matrix.hpp"

namespace mamo {

// Seeded synthetic population for desk-scale experiments. Users fall into
// clusters; each cluster has a profile archetype and a linear preference
// function over the encoded item features. With exactly two clusters the
// second preference vector is the negation of the first, which plants
// maximally opposed populations.

struct SynthConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 100;
  std::size_t n_clusters = 2;
  double noise_sd = 0.3;
  std::size_t records_per_user = 20;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  Schema schema;
  std::vector<RawProfileRow> users;
  std::vector<RawProfileRow> items;
  std::vector<RatingRecord> records;
  std::vector<std::pair<std::string, std::size_t>> clusters;  // user_id -> cluster
  std::vector<Vec> cluster_weights;  // planted preference vector per cluster
  double rating_center = 3.0;
};

inline std::string padded_id(char prefix, std::size_t n, std::size_t width = 5) {
  std::string digits = std::to_string(n);
  while (digits.size() < width) digits.insert(digits.begin(), '0');
  return prefix + digits;
}

inline Schema make_synthetic_schema(std::size_t n_clusters) {
  Schema schema;
  schema.id = "synthetic-v1";
  schema.rating_min = 1.0;
  schema.rating_max = 5.0;
  // User profiles are the cluster prototype itself: within a cluster every
  // profile is identical, so profile-conditioned personalization is exactly
  // cluster-conditioned.
  FieldSpec archetype{"archetype", FieldType::categorical, {}, {}};
  for (std::size_t c = 0; c < n_clusters; ++c) archetype.vocab.push_back("a" + std::to_string(c));
  schema.user_fields = {archetype};
  // Item features are deliberately wider than one support set can identify:
  // a handful of rated items cannot pin a preference vector over this many
  // one-hot blocks, which is what makes the cold-start prior matter.
  FieldSpec genre{"genre", FieldType::categorical, {}, {}};
  for (int g = 0; g < 12; ++g) genre.vocab.push_back("g" + std::to_string(g));
  FieldSpec year{"year", FieldType::numeric_bucketed, {},
                 {1950.0, 1965.0, 1980.0, 1995.0, 2005.0}};
  FieldSpec tags{"tags", FieldType::multi_categorical, {}, {}};
  for (int t = 0; t < 12; ++t) tags.vocab.push_back("k" + std::to_string(t));
  schema.item_fields = {genre, year, tags};
  return schema;
}

inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n_clusters < 1) throw ConfigError("generate_synthetic: n_clusters must be >= 1");
  if (cfg.n_users < 1 || cfg.n_items < 2) {
    throw ConfigError("generate_synthetic: need at least 1 user and 2 items");
  }
  if (cfg.records_per_user < 2 || cfg.records_per_user > cfg.n_items) {
    throw ConfigError("generate_synthetic: records_per_user must lie in [2, n_items]");
  }
  SyntheticData data;
  data.schema = make_synthetic_schema(cfg.n_clusters);
  Rng rng(cfg.seed);

  // Cluster preference vectors over the encoded item features. Entries are
  // scaled so that ratings stay inside [1, 5] before noise.
  const std::size_t d_i = data.schema.item_dim();
  data.cluster_weights.resize(cfg.n_clusters);
  for (auto& w : data.cluster_weights) {
    w.resize(d_i);
    for (double& x : w) x = rng.uniform(-0.45, 0.45);
  }
  if (cfg.n_clusters == 2) {
    // Opposed preference signs: the two populations disagree on every item.
    for (std::size_t j = 0; j < d_i; ++j) data.cluster_weights[1][j] = -data.cluster_weights[0][j];
  }

  // Items.
  std::vector<Vec> encoded_items;
  encoded_items.reserve(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    RawProfileRow row;
    row.id = padded_id('i', i + 1);
    const auto& genre_vocab = data.schema.item_fields[0].vocab;
    row.values.push_back(genre_vocab[rng.bounded(genre_vocab.size())]);
    row.values.push_back(std::to_string(1940 + static_cast<int>(rng.bounded(81))));
    const auto& tag_vocab = data.schema.item_fields[2].vocab;
    const std::size_t first_tag = rng.bounded(tag_vocab.size());
    std::string tags = tag_vocab[first_tag];
    if (rng.uniform() < 0.5) {
      const std::size_t second = rng.bounded(tag_vocab.size());
      if (second != first_tag) tags += "|" + tag_vocab[second];
    }
    row.values.push_back(tags);
    encoded_items.push_back(encode_item(row.values, data.schema).values);
    data.items.push_back(std::move(row));
  }

  // Users and their rating records.
  std::vector<std::size_t> item_order(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) item_order[i] = i;
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    RawProfileRow row;
    row.id = padded_id('u', u + 1);
    const std::size_t cluster = u % cfg.n_clusters;
    row.values.push_back("a" + std::to_string(cluster));
    data.users.push_back(row);
    data.clusters.emplace_back(row.id, cluster);

    rng.shuffle(item_order);
    for (std::size_t r = 0; r < cfg.records_per_user; ++r) {
      const std::size_t item = item_order[r];
      double rating = data.rating_center + dot(data.cluster_weights[cluster], encoded_items[item]);
      if (cfg.noise_sd > 0.0) rating += rng.normal(0.0, cfg.noise_sd);
      rating = std::clamp(rating, data.schema.rating_min, data.schema.rating_max);
      data.records.push_back(RatingRecord{row.id, data.items[item].id, rating,
                                          static_cast<std::int64_t>(r)});
    }
  }
  return data;
}

}  // namespace mamo

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mamo/csv.hpp"
#include "mamo/data.hpp"
#include "mamo/parsers.hpp"
#include "mamo/synthetic.hpp"

using namespace mamo;

namespace {

// Inverse of the one-hot encoding: active index per block.
std::vector<std::vector<std::size_t>> decode_blocks(const Vec& encoded,
                                                    const std::vector<FieldSpec>& fields) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t base = 0;
  for (const auto& f : fields) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < f.dim(); ++i) {
      if (encoded[base + i] == 1.0) active.push_back(i);
    }
    out.push_back(active);
    base += f.dim();
  }
  return out;
}

}  // namespace

TEST_CASE("schema json round-trips") {
  const Schema schema = make_synthetic_schema(3);
  const Schema back = schema_from_json(schema_to_json(schema));
  CHECK(back.id == schema.id);
  CHECK(back.rating_min == schema.rating_min);
  CHECK(back.user_dim() == schema.user_dim());
  CHECK(back.item_dim() == schema.item_dim());
  REQUIRE(back.item_fields.size() == schema.item_fields.size());
  CHECK(back.item_fields[1].edges == schema.item_fields[1].edges);
  CHECK(back.user_fields[0].vocab == schema.user_fields[0].vocab);
}

TEST_CASE("movielens user encoding is 30-dimensional") {
  const Schema schema = movielens_schema();
  CHECK(schema.user_dim() == 30);  // 2 gender + 7 age groups + 21 occupations
  const ProfileVector p = encode_user({"F", "25", "4"}, schema);
  CHECK(p.values.size() == 30);
  double total = 0.0;
  for (double x : p.values) total += x;
  CHECK(total == 3.0);  // one active bit per block
  CHECK(p.values[0] == 1.0);
  CHECK(p.values[2 + 2] == 1.0);   // age "25" is the third group
  CHECK(p.values[9 + 4] == 1.0);   // occupation 4
}

TEST_CASE("encoding is deterministic and decodable") {
  const Schema schema = make_synthetic_schema(3);
  const std::vector<std::string> row{"a1"};
  CHECK(encode_user(row, schema).values == encode_user(row, schema).values);

  const auto blocks = decode_blocks(encode_user(row, schema).values, schema.user_fields);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0] == std::vector<std::size_t>{1});  // a1

  // item side: multi-hot block carries one bit per active tag
  const ProfileVector item = encode_item({"g3", "1975", "k1|k4"}, schema);
  const auto item_blocks = decode_blocks(item.values, schema.item_fields);
  CHECK(item_blocks[0] == std::vector<std::size_t>{3});
  CHECK(item_blocks[1] == std::vector<std::size_t>{2});  // 1975 falls in [1965, 1980)
  CHECK(item_blocks[2] == std::vector<std::size_t>{1, 4});
}

TEST_CASE("encoding rejects missing and unknown values with the field named") {
  const Schema schema = make_synthetic_schema(2);
  CHECK_THROWS_MATCHES(encode_user({""}, schema), DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("archetype")));
  CHECK_THROWS_MATCHES(encode_user({"a9"}, schema), DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("a9")));
  CHECK_THROWS_AS(encode_item({"g0", "not-a-year", "k0"}, schema), DataError);
  CHECK_THROWS_AS(encode_user({"a0", "extra"}, schema), DataError);  // wrong arity
}

TEST_CASE("bucketed numeric fields use half-open intervals") {
  const std::vector<double> edges{1960.0, 1980.0, 2000.0};
  CHECK(bucket_of(1900.0, edges) == 0);
  CHECK(bucket_of(1959.999, edges) == 0);
  CHECK(bucket_of(1960.0, edges) == 1);
  CHECK(bucket_of(1999.0, edges) == 2);
  CHECK(bucket_of(2000.0, edges) == 3);
  CHECK(bucket_of(2024.0, edges) == 3);
}

TEST_CASE("split_users honors the ratio and is deterministic") {
  std::vector<std::string> ten;
  for (int i = 1; i <= 10; ++i) ten.push_back(std::to_string(i));
  const DatasetSplit split = split_users(ten, 0.8, 42);
  CHECK(split.train_users.size() == 8);
  CHECK(split.test_users.size() == 2);

  const DatasetSplit again = split_users(ten, 0.8, 42);
  CHECK(split.train_users == again.train_users);
  CHECK(split.test_users == again.test_users);
  CHECK(split_users(ten, 0.8, 43).train_users != split.train_users);
}

TEST_CASE("split_users partitions large user sets") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("user" + std::to_string(i));
  const DatasetSplit split = split_users(ids, 0.5, 7);
  CHECK(split.train_users.size() == 500);
  CHECK(split.test_users.size() == 500);
  std::set<std::string> all(split.train_users.begin(), split.train_users.end());
  for (const auto& u : split.test_users) {
    CHECK(!all.contains(u));
    all.insert(u);
  }
  CHECK(all.size() == 1000);

  CHECK_THROWS_AS(split_users({}, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(split_users(ids, 1.0, 1), ConfigError);
}

TEST_CASE("make_episode splits sorted records into support and query") {
  Rng rng(3);
  ProfileVector profile{Vec{1.0, 0.0}, "s"};
  std::vector<SupportItem> records;
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) {
    records.push_back(SupportItem{static_cast<std::size_t>(i), 3.0, 100 - i});  // reversed order
    ids.push_back("i" + std::to_string(i));
  }
  const auto ep = make_episode("u1", profile, records, ids, 15, 20);
  REQUIRE(ep.has_value());
  CHECK(ep->support.size() == 15);
  CHECK(ep->query.size() == 5);
  std::int64_t max_support = ep->support.front().order_key;
  for (const auto& s : ep->support) max_support = std::max(max_support, s.order_key);
  for (const auto& q : ep->query) CHECK(q.order_key >= max_support);
}

TEST_CASE("make_episode boundary and shuffle invariance") {
  ProfileVector profile{Vec{1.0}, "s"};
  std::vector<SupportItem> records;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    records.push_back(SupportItem{static_cast<std::size_t>(i), 2.0 + i, 10 + i});
    ids.push_back("i" + std::to_string(i));
  }
  const auto ep = make_episode("u", profile, records, ids, 5, 20);
  REQUIRE(ep.has_value());
  CHECK(ep->query.size() == 1);

  // shuffled input produces the identical episode
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<SupportItem> shuffled;
  std::vector<std::string> shuffled_ids;
  for (std::size_t i : perm) {
    shuffled.push_back(records[i]);
    shuffled_ids.push_back(ids[i]);
  }
  const auto ep2 = make_episode("u", profile, shuffled, shuffled_ids, 5, 20);
  REQUIRE(ep2.has_value());
  for (std::size_t i = 0; i < ep->support.size(); ++i) {
    CHECK(ep->support[i].item == ep2->support[i].item);
  }
  CHECK(ep->query[0].item == ep2->query[0].item);

  // too few records: skipped with a reason
  std::string reason;
  const auto none = make_episode("u", profile, {records[0]}, {ids[0]}, 5, 20, &reason);
  CHECK(!none.has_value());
  CHECK(reason.find("u") != std::string::npos);
}

TEST_CASE("scenario labeling follows the threshold rules") {
  std::vector<RatingRecord> records;
  for (int i = 0; i < 12; ++i) records.push_back({"u1", "popular", 4.0, i});
  records.push_back({"u2", "rare", 3.0, 50});
  ScenarioRules rules;
  rules.user_rule = ScenarioRules::UserRule::order_key_cutoff;
  rules.user_value = 40;  // first key < 40 -> warm
  rules.item_cold_threshold = 10;
  const ScenarioLabeler labeler = build_scenario_labeler(records, rules);

  CHECK(labeler.label("u1", "popular") == Scenario::warm_warm);
  CHECK(labeler.label("u1", "rare") == Scenario::warm_cold);
  CHECK(labeler.label("u2", "popular") == Scenario::cold_warm);
  CHECK(labeler.label("u2", "rare") == Scenario::cold_cold);
  CHECK(labeler.label("u2", "never-seen") == Scenario::cold_cold);  // unknown item -> cold
  CHECK(labeler.unknown_items_seen == 1);
}

TEST_CASE("with no prior ratings every item is cold") {
  const ScenarioLabeler labeler = build_scenario_labeler({}, ScenarioRules{});
  CHECK(labeler.item_cold("anything"));
  CHECK(labeler.user_cold("anyone"));
}

TEST_CASE("scenario histogram matches a brute-force recount") {
  Rng rng(99);
  std::vector<RatingRecord> records;
  for (int i = 0; i < 400; ++i) {
    records.push_back({"u" + std::to_string(rng.bounded(30)),
                       "i" + std::to_string(rng.bounded(40)), 3.0,
                       static_cast<std::int64_t>(rng.bounded(1000))});
  }
  ScenarioRules rules;
  rules.user_rule = ScenarioRules::UserRule::id_percentile;
  rules.user_value = 0.7;
  rules.item_cold_threshold = 8;
  const ScenarioLabeler labeler = build_scenario_labeler(records, rules);

  // independent recount
  std::unordered_map<std::string, int> counts;
  std::set<std::string> users;
  for (const auto& r : records) {
    ++counts[r.item_id];
    users.insert(r.user_id);
  }
  std::vector<std::string> ordered(users.begin(), users.end());
  std::sort(ordered.begin(), ordered.end(), id_less);
  const std::size_t warm_cut =
      static_cast<std::size_t>(std::llround(ordered.size() * rules.user_value));
  std::unordered_set<std::string> warm(ordered.begin(), ordered.begin() + warm_cut);

  std::array<int, 4> got{}, want{};
  for (const auto& r : records) {
    ++got[static_cast<int>(labeler.label(r.user_id, r.item_id))];
    const bool user_cold = !warm.contains(r.user_id);
    const bool item_cold = counts[r.item_id] < rules.item_cold_threshold;
    ++want[static_cast<int>(scenario_of(user_cold, item_cold))];
  }
  CHECK(got == want);
  CHECK(got[0] + got[1] + got[2] + got[3] == 400);
}

TEST_CASE("synthetic generation is deterministic and noiseless ratings are exact") {
  SynthConfig cfg;
  cfg.n_users = 30;
  cfg.n_items = 25;
  cfg.n_clusters = 1;
  cfg.noise_sd = 0.0;
  cfg.records_per_user = 10;
  const SyntheticData a = generate_synthetic(cfg);
  const SyntheticData b = generate_synthetic(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].user_id == b.records[i].user_id);
    CHECK(a.records[i].rating == b.records[i].rating);
  }

  // every rating reproduces the planted linear function exactly
  std::unordered_map<std::string, Vec> encoded;
  for (const auto& item : a.items) encoded[item.id] = encode_item(item.values, a.schema).values;
  for (const auto& rec : a.records) {
    const double want = std::clamp(a.rating_center + dot(a.cluster_weights[0], encoded[rec.item_id]),
                                   a.schema.rating_min, a.schema.rating_max);
    CHECK(rec.rating == want);
  }

  SynthConfig other = cfg;
  other.seed = 99;
  CHECK(generate_synthetic(other).records[0].rating != a.records[0].rating);
}

TEST_CASE("two opposed clusters rate shared items with negative correlation") {
  SynthConfig cfg;
  cfg.n_users = 10;
  cfg.n_items = 40;
  cfg.n_clusters = 2;
  cfg.noise_sd = 0.0;
  const SyntheticData data = generate_synthetic(cfg);
  // planted functions, evaluated on every item
  Vec r0, r1;
  for (const auto& item : data.items) {
    const Vec x = encode_item(item.values, data.schema).values;
    r0.push_back(data.rating_center + dot(data.cluster_weights[0], x));
    r1.push_back(data.rating_center + dot(data.cluster_weights[1], x));
  }
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < r0.size(); ++i) {
    m0 += r0[i];
    m1 += r1[i];
  }
  m0 /= r0.size();
  m1 /= r1.size();
  double cov = 0, v0 = 0, v1 = 0;
  for (std::size_t i = 0; i < r0.size(); ++i) {
    cov += (r0[i] - m0) * (r1[i] - m1);
    v0 += (r0[i] - m0) * (r0[i] - m0);
    v1 += (r1[i] - m1) * (r1[i] - m1);
  }
  const double correlation = cov / std::sqrt(v0 * v1);
  CHECK(correlation < -0.99);  // exact negation of the preference vector
}

TEST_CASE("a least-squares fit on the planted features has zero residual without noise") {
  SynthConfig cfg;
  cfg.n_users = 6;
  cfg.n_items = 60;
  cfg.n_clusters = 2;
  cfg.noise_sd = 0.0;
  cfg.records_per_user = 20;
  const SyntheticData data = generate_synthetic(cfg);
  std::unordered_map<std::string, Vec> encoded;
  for (const auto& item : data.items) encoded[item.id] = encode_item(item.values, data.schema).values;
  std::unordered_map<std::string, std::size_t> cluster_of(data.clusters.begin(),
                                                          data.clusters.end());

  // normal equations per cluster, ridge-free with a tiny diagonal for rank
  // deficiency of the one-hot design
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<Vec> xs;
    Vec ys;
    for (const auto& rec : data.records) {
      if (cluster_of[rec.user_id] != c) continue;
      if (rec.rating <= data.schema.rating_min || rec.rating >= data.schema.rating_max) continue;
      Vec x = encoded[rec.item_id];
      x.push_back(1.0);  // intercept
      xs.push_back(std::move(x));
      ys.push_back(rec.rating);
    }
    REQUIRE(xs.size() > 20);
    const std::size_t d = xs[0].size();
    std::vector<Vec> ata(d, Vec(d, 0.0));
    Vec aty(d, 0.0);
    for (std::size_t n = 0; n < xs.size(); ++n) {
      for (std::size_t i = 0; i < d; ++i) {
        aty[i] += xs[n][i] * ys[n];
        for (std::size_t j = 0; j < d; ++j) ata[i][j] += xs[n][i] * xs[n][j];
      }
    }
    for (std::size_t i = 0; i < d; ++i) ata[i][i] += 1e-9;
    // gaussian elimination
    for (std::size_t col = 0; col < d; ++col) {
      std::size_t pivot = col;
      for (std::size_t r = col + 1; r < d; ++r) {
        if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
      }
      std::swap(ata[col], ata[pivot]);
      std::swap(aty[col], aty[pivot]);
      for (std::size_t r = 0; r < d; ++r) {
        if (r == col || ata[r][col] == 0.0) continue;
        const double f = ata[r][col] / ata[col][col];
        for (std::size_t j = 0; j < d; ++j) ata[r][j] -= f * ata[col][j];
        aty[r] -= f * aty[col];
      }
    }
    Vec w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = aty[i] / ata[i][i];
    for (std::size_t n = 0; n < xs.size(); ++n) {
      const double pred = dot(w, xs[n]);
      CHECK(std::abs(pred - ys[n]) < 1e-6);
    }
  }
}

TEST_CASE("csv codec round-trips awkward fields") {
  const std::vector<std::string> fields{"plain", "with,comma", "with\"quote", "both\",\"x", ""};
  const std::string line = csv_join(fields);
  CHECK(csv_split(line) == fields);

  const std::vector<std::string> semi{"a;b", "c"};
  CHECK(csv_split(csv_join(semi, ';'), ';') == semi);
}

TEST_CASE("dataset directory round-trips through the store") {
  test_helpers::TempDir dir("store");
  SynthConfig cfg;
  cfg.n_users = 15;
  cfg.n_items = 12;
  cfg.records_per_user = 6;
  const SyntheticData data = generate_synthetic(cfg);
  write_dataset_dir(dir.str(), data.schema, data.users, data.items, data.records, &data.clusters);

  const StoredDataset stored = load_dataset_dir(dir.str());
  CHECK(stored.schema.id == data.schema.id);
  CHECK(stored.user_ids.size() == 15);
  CHECK(stored.item_profiles.size() == 12);
  CHECK(stored.records.size() == data.records.size());
  CHECK(stored.users_rejected == 0);
  CHECK(stored.records_dropped == 0);

  // canonical order and profile dimensional stability
  CHECK(std::is_sorted(stored.user_ids.begin(), stored.user_ids.end(), id_less));
  for (const auto& [id, profile] : stored.user_profiles) {
    CHECK(profile.values.size() == stored.schema.user_dim());
  }

  // episode construction covers every eligible user and keeps time order
  EpisodeBuildStats stats;
  const auto episodes = build_episodes(stored, stored.user_ids, 4, 6, nullptr, &stats);
  CHECK(stats.episodes_built == 15);
  for (const auto& ep : episodes) {
    REQUIRE(ep.support.size() == 4);
    REQUIRE(ep.query.size() == 2);
    for (const auto& q : ep.query) {
      for (const auto& s : ep.support) CHECK(q.order_key >= s.order_key);
    }
  }
}

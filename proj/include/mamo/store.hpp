#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mamo/csv.hpp"
#include "mamo/data.hpp"

namespace mamo {

// Canonical on-disk dataset layout, shared by the synthetic generator, the
// raw-dataset parsers and the trainer:
//   schema.json        field declarations + rating range
//   ratings.csv        user_id,item_id,rating,order_key
//   user_profiles.csv  user_id,<user field names...>
//   item_profiles.csv  item_id,<item field names...>
//   clusters.csv       user_id,cluster_id   (synthetic data only)

inline void write_dataset_dir(const std::string& dir, const Schema& schema,
                              const std::vector<RawProfileRow>& users,
                              const std::vector<RawProfileRow>& items,
                              const std::vector<RatingRecord>& records,
                              const std::vector<std::pair<std::string, std::size_t>>* clusters =
                                  nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());

  {
    std::ofstream out(fs::path(dir) / "schema.json");
    if (!out) throw DataError("cannot write schema.json in " + dir);
    out << schema_to_json(schema).dump(2) << '\n';
  }

  auto profile_rows = [](const std::vector<RawProfileRow>& rows) {
    std::vector<std::vector<std::string>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      std::vector<std::string> row{r.id};
      row.insert(row.end(), r.values.begin(), r.values.end());
      out.push_back(std::move(row));
    }
    return out;
  };
  auto field_names = [](const std::vector<FieldSpec>& fields, const std::string& id_col) {
    std::vector<std::string> header{id_col};
    for (const auto& f : fields) header.push_back(f.name);
    return header;
  };
  write_csv((fs::path(dir) / "user_profiles.csv").string(),
            field_names(schema.user_fields, "user_id"), profile_rows(users));
  write_csv((fs::path(dir) / "item_profiles.csv").string(),
            field_names(schema.item_fields, "item_id"), profile_rows(items));

  std::vector<std::vector<std::string>> rating_rows;
  rating_rows.reserve(records.size());
  for (const auto& r : records) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", r.rating);
    rating_rows.push_back({r.user_id, r.item_id, buf, std::to_string(r.order_key)});
  }
  write_csv((fs::path(dir) / "ratings.csv").string(),
            {"user_id", "item_id", "rating", "order_key"}, rating_rows);

  if (clusters) {
    std::vector<std::vector<std::string>> cluster_rows;
    cluster_rows.reserve(clusters->size());
    for (const auto& [user, cluster] : *clusters) {
      cluster_rows.push_back({user, std::to_string(cluster)});
    }
    write_csv((fs::path(dir) / "clusters.csv").string(), {"user_id", "cluster_id"}, cluster_rows);
  }
}

/// A loaded dataset: encoded profiles plus the rating records whose user and
/// item both have valid profiles. Rejected rows are counted, with a bounded
/// sample of reasons retained for reporting.
struct StoredDataset {
  Schema schema;
  std::vector<std::string> user_ids;  // canonical id order
  std::unordered_map<std::string, ProfileVector> user_profiles;
  std::vector<std::string> item_ids;          // aligned with item_profiles
  std::vector<ProfileVector> item_profiles;   // shared table, episodes index into it
  std::unordered_map<std::string, std::size_t> item_index;
  std::vector<RatingRecord> records;

  std::size_t users_rejected = 0;
  std::size_t items_rejected = 0;
  std::size_t records_dropped = 0;
  std::vector<std::string> reject_sample;

  void note_reject(const std::string& reason) {
    if (reject_sample.size() < 20) reject_sample.push_back(reason);
  }
};

inline StoredDataset load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  StoredDataset data;
  {
    std::ifstream in(fs::path(dir) / "schema.json");
    if (!in) throw DataError("cannot open schema.json in " + dir);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("schema.json: ") + e.what());
    }
    data.schema = schema_from_json(j);
  }

  auto check_header = [](const CsvTable& table, const std::vector<FieldSpec>& fields,
                         const std::string& id_col, const std::string& file) {
    std::vector<std::string> expected{id_col};
    for (const auto& f : fields) expected.push_back(f.name);
    if (table.header != expected) {
      throw DataError(file + ": header does not match the schema field order");
    }
  };

  {
    const auto path = (fs::path(dir) / "user_profiles.csv").string();
    CsvTable table = read_csv(path);
    check_header(table, data.schema.user_fields, "user_id", path);
    for (auto& row : table.rows) {
      const std::string id = row.at(0);
      try {
        std::vector<std::string> values(row.begin() + 1, row.end());
        data.user_profiles.emplace(id, encode_user(values, data.schema));
        data.user_ids.push_back(id);
      } catch (const DataError& e) {
        ++data.users_rejected;
        data.note_reject("user " + id + ": " + e.what());
      }
    }
    std::sort(data.user_ids.begin(), data.user_ids.end(), id_less);
  }

  {
    const auto path = (fs::path(dir) / "item_profiles.csv").string();
    CsvTable table = read_csv(path);
    check_header(table, data.schema.item_fields, "item_id", path);
    for (auto& row : table.rows) {
      const std::string id = row.at(0);
      try {
        std::vector<std::string> values(row.begin() + 1, row.end());
        ProfileVector profile = encode_item(values, data.schema);
        data.item_index.emplace(id, data.item_profiles.size());
        data.item_profiles.push_back(std::move(profile));
        data.item_ids.push_back(id);
      } catch (const DataError& e) {
        ++data.items_rejected;
        data.note_reject("item " + id + ": " + e.what());
      }
    }
  }

  {
    const auto path = (fs::path(dir) / "ratings.csv").string();
    CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"user_id", "item_id", "rating", "order_key"}) {
      throw DataError(path + ": unexpected header");
    }
    for (const auto& row : table.rows) {
      if (row.size() != 4) {
        ++data.records_dropped;
        continue;
      }
      RatingRecord rec;
      rec.user_id = row[0];
      rec.item_id = row[1];
      try {
        rec.rating = std::stod(row[2]);
        rec.order_key = std::stoll(row[3]);
      } catch (...) {
        ++data.records_dropped;
        data.note_reject("rating row for user " + rec.user_id + ": malformed number");
        continue;
      }
      if (rec.rating < data.schema.rating_min || rec.rating > data.schema.rating_max) {
        ++data.records_dropped;
        data.note_reject("rating " + row[2] + " outside the declared range");
        continue;
      }
      if (!data.user_profiles.contains(rec.user_id) || !data.item_index.contains(rec.item_id)) {
        ++data.records_dropped;  // profile-less records are filtered
        continue;
      }
      data.records.push_back(std::move(rec));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Episode assembly

struct EpisodeBuildStats {
  std::size_t users_considered = 0;
  std::size_t episodes_built = 0;
  std::size_t users_skipped = 0;
  std::vector<std::string> skip_sample;
};

/// Build episodes for `users` (already in canonical order). When a labeler is
/// given, each query record receives its cold-start scenario tag.
inline std::vector<Episode> build_episodes(const StoredDataset& data,
                                           const std::vector<std::string>& users,
                                           std::size_t support_size, std::size_t cap,
                                           const ScenarioLabeler* labeler,
                                           EpisodeBuildStats* stats = nullptr) {
  std::unordered_map<std::string, std::vector<std::pair<SupportItem, std::string>>> by_user;
  for (const auto& rec : data.records) {
    by_user[rec.user_id].push_back(
        {SupportItem{data.item_index.at(rec.item_id), rec.rating, rec.order_key}, rec.item_id});
  }
  std::vector<Episode> episodes;
  for (const auto& user : users) {
    if (stats) ++stats->users_considered;
    auto profile_it = data.user_profiles.find(user);
    auto records_it = by_user.find(user);
    std::vector<SupportItem> items;
    std::vector<std::string> item_ids;
    if (records_it != by_user.end()) {
      for (auto& [item, id] : records_it->second) {
        items.push_back(item);
        item_ids.push_back(id);
      }
    }
    std::string reason;
    std::optional<Episode> ep;
    if (profile_it == data.user_profiles.end()) {
      reason = "user " + user + " has no profile";
    } else {
      ep = make_episode(user, profile_it->second, std::move(items), item_ids, support_size, cap,
                        &reason);
    }
    if (!ep) {
      if (stats) {
        ++stats->users_skipped;
        if (stats->skip_sample.size() < 20) stats->skip_sample.push_back(reason);
      }
      continue;
    }
    if (labeler) {
      ep->query_scenarios.reserve(ep->query.size());
      for (const auto& q : ep->query) {
        ep->query_scenarios.push_back(labeler->label(user, data.item_ids[q.item]));
      }
    }
    episodes.push_back(std::move(*ep));
    if (stats) ++stats->episodes_built;
  }
  return episodes;
}

}  // namespace mamo

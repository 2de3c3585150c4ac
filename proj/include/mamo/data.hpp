#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mamo/error.hpp"
#include "mamo/matrix.hpp"

namespace mamo {

// ---------------------------------------------------------------------------
// Core records

/// Fixed-length numeric encoding of a user or item profile.
struct ProfileVector {
  Vec values;
  std::string schema_id;
};

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::int64_t order_key = 0;  // review time or surrogate ordering
};

/// An unencoded profile row; `values` align with the schema field order.
struct RawProfileRow {
  std::string id;
  std::vector<std::string> values;
};

enum class Scenario { warm_warm, warm_cold, cold_warm, cold_cold };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::warm_warm: return "W-W";
    case Scenario::warm_cold: return "W-C";
    case Scenario::cold_warm: return "C-W";
    case Scenario::cold_cold: return "C-C";
  }
  return "?";
}

inline Scenario scenario_of(bool user_cold, bool item_cold) {
  if (user_cold) return item_cold ? Scenario::cold_cold : Scenario::cold_warm;
  return item_cold ? Scenario::warm_cold : Scenario::warm_warm;
}

/// One rated item inside an episode; `item` indexes a shared profile table.
struct SupportItem {
  std::size_t item = 0;
  double rating = 0.0;
  std::int64_t order_key = 0;
};

/// One user's task: profile, support ratings for local adaptation, and
/// held-out query ratings.
struct Episode {
  std::string user_id;
  ProfileVector profile;
  std::vector<SupportItem> support;
  std::vector<SupportItem> query;
  std::vector<Scenario> query_scenarios;  // populated for test episodes
};

// ---------------------------------------------------------------------------
// Id ordering: numeric when both ids parse as unsigned integers, otherwise
// lexicographic. Keeps canonical user order meaningful for datasets with
// integer ids without breaking alphanumeric ones.

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s.size() > 19) return false;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  out = v;
  return true;
}

inline bool id_less(const std::string& a, const std::string& b) {
  std::uint64_t na = 0, nb = 0;
  if (parse_u64(a, na) && parse_u64(b, nb)) {
    if (na != nb) return na < nb;
    return a < b;
  }
  return a < b;
}

// ---------------------------------------------------------------------------
// Profile schema

enum class FieldType { categorical, multi_categorical, numeric_bucketed };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::categorical;
  std::vector<std::string> vocab;  // categorical / multi_categorical
  std::vector<double> edges;       // numeric_bucketed boundaries, ascending

  std::size_t dim() const {
    if (type == FieldType::numeric_bucketed) return edges.size() + 1;
    return vocab.size();
  }
};

struct Schema {
  std::string id;
  double rating_min = 1.0;
  double rating_max = 5.0;
  std::vector<FieldSpec> user_fields;
  std::vector<FieldSpec> item_fields;

  std::size_t user_dim() const {
    std::size_t d = 0;
    for (const auto& f : user_fields) d += f.dim();
    return d;
  }
  std::size_t item_dim() const {
    std::size_t d = 0;
    for (const auto& f : item_fields) d += f.dim();
    return d;
  }
};

inline const char* field_type_name(FieldType t) {
  switch (t) {
    case FieldType::categorical: return "categorical";
    case FieldType::multi_categorical: return "multi_categorical";
    case FieldType::numeric_bucketed: return "numeric_bucketed";
  }
  return "?";
}

inline FieldType field_type_from_name(const std::string& s) {
  if (s == "categorical") return FieldType::categorical;
  if (s == "multi_categorical") return FieldType::multi_categorical;
  if (s == "numeric_bucketed") return FieldType::numeric_bucketed;
  throw DataError("schema: unknown field type '" + s + "'");
}

inline nlohmann::json schema_to_json(const Schema& schema) {
  auto fields_json = [](const std::vector<FieldSpec>& fields) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : fields) {
      nlohmann::json j{{"name", f.name}, {"type", field_type_name(f.type)}};
      if (f.type == FieldType::numeric_bucketed) j["edges"] = f.edges;
      else j["vocab"] = f.vocab;
      arr.push_back(std::move(j));
    }
    return arr;
  };
  return nlohmann::json{{"schema_id", schema.id},
                        {"rating_min", schema.rating_min},
                        {"rating_max", schema.rating_max},
                        {"user_fields", fields_json(schema.user_fields)},
                        {"item_fields", fields_json(schema.item_fields)}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema schema;
  try {
    schema.id = j.at("schema_id").get<std::string>();
    schema.rating_min = j.at("rating_min").get<double>();
    schema.rating_max = j.at("rating_max").get<double>();
    auto parse_fields = [](const nlohmann::json& arr) {
      std::vector<FieldSpec> fields;
      for (const auto& fj : arr) {
        FieldSpec f;
        f.name = fj.at("name").get<std::string>();
        f.type = field_type_from_name(fj.at("type").get<std::string>());
        if (f.type == FieldType::numeric_bucketed) {
          f.edges = fj.at("edges").get<std::vector<double>>();
          if (!std::is_sorted(f.edges.begin(), f.edges.end())) {
            throw DataError("schema: bucket edges for '" + f.name + "' must be ascending");
          }
        } else {
          f.vocab = fj.at("vocab").get<std::vector<std::string>>();
          if (f.vocab.empty()) throw DataError("schema: empty vocabulary for '" + f.name + "'");
        }
        fields.push_back(std::move(f));
      }
      return fields;
    };
    schema.user_fields = parse_fields(j.at("user_fields"));
    schema.item_fields = parse_fields(j.at("item_fields"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("schema: malformed json: ") + e.what());
  }
  if (!(schema.rating_min < schema.rating_max)) {
    throw DataError("schema: rating_min must be below rating_max");
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Profile encoding: concatenated one-hot / multi-hot / bucketed-one-hot
// blocks, in schema field order. Multi-valued fields use '|' between values.

inline std::size_t bucket_of(double value, const std::vector<double>& edges) {
  std::size_t b = 0;
  while (b < edges.size() && value >= edges[b]) ++b;
  return b;
}

inline void encode_field(const FieldSpec& field, const std::string& raw, Vec& out) {
  const std::size_t base = out.size();
  out.resize(base + field.dim(), 0.0);
  switch (field.type) {
    case FieldType::categorical: {
      if (raw.empty()) throw DataError("missing value for field '" + field.name + "'");
      auto it = std::find(field.vocab.begin(), field.vocab.end(), raw);
      if (it == field.vocab.end()) {
        throw DataError("unknown category '" + raw + "' for field '" + field.name + "'");
      }
      out[base + static_cast<std::size_t>(it - field.vocab.begin())] = 1.0;
      break;
    }
    case FieldType::multi_categorical: {
      // empty value = no active categories, which is legal
      std::size_t start = 0;
      while (start <= raw.size() && !raw.empty()) {
        const std::size_t end = raw.find('|', start);
        const std::string token = raw.substr(start, end == std::string::npos ? end : end - start);
        if (!token.empty()) {
          auto it = std::find(field.vocab.begin(), field.vocab.end(), token);
          if (it == field.vocab.end()) {
            throw DataError("unknown category '" + token + "' for field '" + field.name + "'");
          }
          out[base + static_cast<std::size_t>(it - field.vocab.begin())] = 1.0;
        }
        if (end == std::string::npos) break;
        start = end + 1;
      }
      break;
    }
    case FieldType::numeric_bucketed: {
      if (raw.empty()) throw DataError("missing value for field '" + field.name + "'");
      double value = 0.0;
      try {
        value = std::stod(raw);
      } catch (...) {
        throw DataError("non-numeric value '" + raw + "' for field '" + field.name + "'");
      }
      out[base + bucket_of(value, field.edges)] = 1.0;
      break;
    }
  }
}

/// Encode one profile row. `values` must align with `fields`; a missing or
/// unknown value rejects the record with the offending field named.
inline Vec encode_fields(const std::vector<std::string>& values,
                         const std::vector<FieldSpec>& fields) {
  if (values.size() != fields.size()) {
    throw DataError("profile row has " + std::to_string(values.size()) + " values but schema has " +
                    std::to_string(fields.size()) + " fields");
  }
  Vec out;
  for (std::size_t i = 0; i < fields.size(); ++i) encode_field(fields[i], values[i], out);
  return out;
}

inline ProfileVector encode_user(const std::vector<std::string>& values, const Schema& schema) {
  return ProfileVector{encode_fields(values, schema.user_fields), schema.id};
}

inline ProfileVector encode_item(const std::vector<std::string>& values, const Schema& schema) {
  return ProfileVector{encode_fields(values, schema.item_fields), schema.id};
}

// ---------------------------------------------------------------------------
// Train/test split

struct DatasetSplit {
  std::vector<std::string> train_users;
  std::vector<std::string> test_users;
};

/// Seeded shuffle then prefix split; both sides keep canonical id order.
inline DatasetSplit split_users(std::vector<std::string> user_ids, double ratio,
                                std::uint64_t seed) {
  if (user_ids.empty()) throw ConfigError("split_users: empty user set");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split_users: ratio must lie in (0, 1)");
  std::sort(user_ids.begin(), user_ids.end(), id_less);
  Rng rng(seed);
  rng.shuffle(user_ids);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(user_ids.size()) * ratio));
  DatasetSplit split;
  split.train_users.assign(user_ids.begin(), user_ids.begin() + n_train);
  split.test_users.assign(user_ids.begin() + n_train, user_ids.end());
  std::sort(split.train_users.begin(), split.train_users.end(), id_less);
  std::sort(split.test_users.begin(), split.test_users.end(), id_less);
  return split;
}

// ---------------------------------------------------------------------------
// Episode construction

/// Sort a user's records by order key (ties by item id), cap, and split into
/// support prefix / query remainder. Returns nothing when the user has too
/// few records, with the reason reported through `reason`.
inline std::optional<Episode> make_episode(const std::string& user_id,
                                           const ProfileVector& profile,
                                           std::vector<SupportItem> records,
                                           const std::vector<std::string>& record_item_ids,
                                           std::size_t support_size, std::size_t cap,
                                           std::string* reason = nullptr) {
  if (support_size < 1) throw ConfigError("make_episode: support_size must be >= 1");
  if (cap < support_size + 1) throw ConfigError("make_episode: cap must exceed support_size");
  if (records.size() != record_item_ids.size()) {
    throw ContractError("make_episode: record/id length mismatch");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].order_key != records[b].order_key) {
      return records[a].order_key < records[b].order_key;
    }
    return id_less(record_item_ids[a], record_item_ids[b]);
  });
  if (order.size() > cap) order.resize(cap);
  if (order.size() < support_size + 1) {
    if (reason) {
      *reason = "user " + user_id + " has " + std::to_string(order.size()) +
                " usable records, need " + std::to_string(support_size + 1);
    }
    return std::nullopt;
  }
  Episode ep;
  ep.user_id = user_id;
  ep.profile = profile;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < support_size ? ep.support : ep.query).push_back(records[order[i]]);
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Cold-start scenario labeling

struct ScenarioRules {
  enum class UserRule {
    order_key_cutoff,  // warm iff first rating's order_key < value
    id_percentile,     // warm iff user falls in the first `value` fraction of id order
  };
  UserRule user_rule = UserRule::id_percentile;
  double user_value = 0.9;
  int item_cold_threshold = 10;  // cold iff total rating count < threshold
};

/// Precomputed warm/cold maps. Unknown users and items count as cold.
struct ScenarioLabeler {
  std::unordered_set<std::string> warm_users;
  std::unordered_map<std::string, int> item_counts;
  int item_cold_threshold = 10;
  mutable std::size_t unknown_items_seen = 0;

  bool user_cold(const std::string& user_id) const { return !warm_users.contains(user_id); }

  bool item_cold(const std::string& item_id) const {
    auto it = item_counts.find(item_id);
    if (it == item_counts.end()) {
      ++unknown_items_seen;  // unknown item: cold by convention
      return true;
    }
    return it->second < item_cold_threshold;
  }

  Scenario label(const std::string& user_id, const std::string& item_id) const {
    return scenario_of(user_cold(user_id), item_cold(item_id));
  }
};

inline ScenarioLabeler build_scenario_labeler(std::span<const RatingRecord> records,
                                              const ScenarioRules& rules) {
  ScenarioLabeler labeler;
  labeler.item_cold_threshold = rules.item_cold_threshold;
  std::unordered_map<std::string, std::int64_t> first_key;
  std::vector<std::string> users;
  for (const auto& rec : records) {
    ++labeler.item_counts[rec.item_id];
    auto [it, inserted] = first_key.try_emplace(rec.user_id, rec.order_key);
    if (inserted) users.push_back(rec.user_id);
    else it->second = std::min(it->second, rec.order_key);
  }
  std::sort(users.begin(), users.end(), id_less);
  if (rules.user_rule == ScenarioRules::UserRule::order_key_cutoff) {
    const auto cutoff = static_cast<std::int64_t>(rules.user_value);
    for (const auto& [user, key] : first_key) {
      if (key < cutoff) labeler.warm_users.insert(user);
    }
  } else {
    if (!(rules.user_value >= 0.0 && rules.user_value <= 1.0)) {
      throw ConfigError("scenario rules: warm-user fraction must lie in [0, 1]");
    }
    const auto n_warm = static_cast<std::size_t>(
        std::llround(static_cast<double>(users.size()) * rules.user_value));
    for (std::size_t i = 0; i < n_warm && i < users.size(); ++i) {
      labeler.warm_users.insert(users[i]);
    }
  }
  return labeler;
}

}  // namespace mamo

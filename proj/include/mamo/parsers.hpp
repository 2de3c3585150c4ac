#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "mamo/csv.hpp"
#include "mamo/data.hpp"

namespace mamo {

// Raw-dataset parsers. Both consume local files only, apply the dataset's
// filtering rules, and emit rows in the canonical interchange layout
// (see store.hpp). Malformed rows are skipped and counted.

struct IngestReport {
  std::size_t users_parsed = 0, users_rejected = 0;
  std::size_t items_parsed = 0, items_rejected = 0;
  std::size_t ratings_kept = 0, ratings_rejected = 0;
  std::vector<std::string> sample_reasons;

  void note(const std::string& reason) {
    if (sample_reasons.size() < 20) sample_reasons.push_back(reason);
  }
};

struct ParsedDataset {
  Schema schema;
  std::vector<RawProfileRow> users;
  std::vector<RawProfileRow> items;
  std::vector<RatingRecord> records;
  IngestReport report;
};

namespace detail {

inline std::vector<std::string> split_by(const std::string& line, const std::string& sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return parts;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline bool parse_int(const std::string& s, long long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  std::size_t i = (t[0] == '-') ? 1 : 0;
  if (i == t.size()) return false;
  for (; i < t.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
  }
  try {
    out = std::stoll(t);
  } catch (...) {
    return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MovieLens 1M ("::"-separated .dat files)

inline const std::vector<std::string>& movielens_genres() {
  static const std::vector<std::string> genres{
      "Action",  "Adventure", "Animation", "Children's", "Comedy",  "Crime",
      "Documentary", "Drama", "Fantasy",   "Film-Noir",  "Horror",  "Musical",
      "Mystery", "Romance",   "Sci-Fi",    "Thriller",   "War",     "Western"};
  return genres;
}

inline Schema movielens_schema() {
  Schema schema;
  schema.id = "movielens-1m-v1";
  schema.rating_min = 1.0;
  schema.rating_max = 5.0;
  schema.user_fields = {
      FieldSpec{"gender", FieldType::categorical, {"F", "M"}, {}},
      FieldSpec{"age", FieldType::categorical, {"1", "18", "25", "35", "45", "50", "56"}, {}},
      FieldSpec{"occupation", FieldType::categorical, {}, {}},
  };
  for (int i = 0; i < 21; ++i) schema.user_fields[2].vocab.push_back(std::to_string(i));
  schema.item_fields = {
      FieldSpec{"year", FieldType::numeric_bucketed, {},
                {1950.0, 1960.0, 1970.0, 1980.0, 1990.0, 1995.0, 2000.0}},
      FieldSpec{"genres", FieldType::multi_categorical, movielens_genres(), {}},
  };
  return schema;
}

/// users.dat / movies.dat / ratings.dat -> canonical rows. Users or items
/// with malformed profiles are rejected; ratings referencing rejected
/// profiles are dropped. order_key is the rating timestamp.
inline ParsedDataset parse_movielens(const std::string& users_path, const std::string& items_path,
                                     const std::string& ratings_path) {
  ParsedDataset out;
  out.schema = movielens_schema();
  const auto& genre_vocab = movielens_genres();
  const std::unordered_set<std::string> genre_set(genre_vocab.begin(), genre_vocab.end());

  std::unordered_set<std::string> kept_users, kept_items;
  for (const auto& line : detail::read_lines(users_path)) {
    auto parts = detail::split_by(line, "::");
    if (parts.size() < 4) {
      ++out.report.users_rejected;
      out.report.note("user row with " + std::to_string(parts.size()) + " fields: " + line);
      continue;
    }
    const std::string& id = parts[0];
    const std::string& gender = parts[1];
    const std::string& age = parts[2];
    const std::string& occupation = parts[3];
    const auto& age_vocab = out.schema.user_fields[1].vocab;
    long long occ = 0;
    if ((gender != "M" && gender != "F") ||
        std::find(age_vocab.begin(), age_vocab.end(), age) == age_vocab.end() ||
        !detail::parse_int(occupation, occ) || occ < 0 || occ > 20) {
      ++out.report.users_rejected;
      out.report.note("user " + id + ": invalid profile fields");
      continue;
    }
    out.users.push_back(RawProfileRow{id, {gender, age, occupation}});
    kept_users.insert(id);
    ++out.report.users_parsed;
  }

  for (const auto& line : detail::read_lines(items_path)) {
    auto parts = detail::split_by(line, "::");
    if (parts.size() < 3) {
      ++out.report.items_rejected;
      out.report.note("item row with " + std::to_string(parts.size()) + " fields");
      continue;
    }
    const std::string& id = parts[0];
    const std::string& title = parts[1];
    // release year from the trailing "(YYYY)" in the title
    std::string year;
    if (title.size() >= 6 && title.back() == ')') {
      const std::string candidate = title.substr(title.size() - 5, 4);
      if (std::all_of(candidate.begin(), candidate.end(),
                      [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        year = candidate;
      }
    }
    bool genres_ok = true;
    for (const auto& g : detail::split_by(parts[2], "|")) {
      if (!genre_set.contains(g)) {
        genres_ok = false;
        break;
      }
    }
    if (year.empty() || !genres_ok || parts[2].empty()) {
      ++out.report.items_rejected;
      out.report.note("item " + id + ": missing year or unknown genre");
      continue;
    }
    out.items.push_back(RawProfileRow{id, {year, parts[2]}});
    kept_items.insert(id);
    ++out.report.items_parsed;
  }

  for (const auto& line : detail::read_lines(ratings_path)) {
    auto parts = detail::split_by(line, "::");
    long long rating = 0, timestamp = 0;
    if (parts.size() != 4 || !detail::parse_int(parts[2], rating) ||
        !detail::parse_int(parts[3], timestamp) || rating < 1 || rating > 5) {
      ++out.report.ratings_rejected;
      out.report.note("malformed rating row: " + line);
      continue;
    }
    if (!kept_users.contains(parts[0]) || !kept_items.contains(parts[1])) {
      ++out.report.ratings_rejected;  // profile-less record
      continue;
    }
    out.records.push_back(
        RatingRecord{parts[0], parts[1], static_cast<double>(rating), timestamp});
    ++out.report.ratings_kept;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Book-Crossing (';'-separated, quoted CSV files)

/// BX-Users / BX-Books / BX-Book-Ratings -> canonical rows.
/// Rules: age must lie in [5, 110]; only the country part of the location is
/// kept; publication year must lie in [1500, 2010]; zero ratings (implicit
/// feedback) are dropped. The dataset carries no timestamps, so order_key is
/// the rating-file line order.
inline ParsedDataset parse_bookcrossing(const std::string& users_path,
                                        const std::string& items_path,
                                        const std::string& ratings_path) {
  ParsedDataset out;
  out.schema.id = "bookcrossing-v1";
  out.schema.rating_min = 1.0;
  out.schema.rating_max = 10.0;
  out.schema.user_fields = {
      FieldSpec{"age", FieldType::numeric_bucketed, {}, {18.0, 25.0, 35.0, 45.0, 55.0, 65.0}},
      FieldSpec{"country", FieldType::categorical, {}, {}},
  };
  out.schema.item_fields = {
      FieldSpec{"year", FieldType::numeric_bucketed, {},
                {1950.0, 1970.0, 1980.0, 1990.0, 1995.0, 2000.0, 2005.0}},
      FieldSpec{"author", FieldType::categorical, {}, {}},
      FieldSpec{"publisher", FieldType::categorical, {}, {}},
  };

  auto lines_of = [](const std::string& path) {
    auto lines = detail::read_lines(path);
    if (!lines.empty()) lines.erase(lines.begin());  // header
    return lines;
  };

  std::set<std::string> countries, authors, publishers;
  std::unordered_set<std::string> kept_users, kept_items;

  std::vector<RawProfileRow> raw_users;
  for (const auto& line : lines_of(users_path)) {
    auto parts = csv_split(line, ';');
    if (parts.size() != 3) {
      ++out.report.users_rejected;
      out.report.note("user row with " + std::to_string(parts.size()) + " fields");
      continue;
    }
    const std::string& id = parts[0];
    long long age = 0;
    if (!detail::parse_int(parts[2], age) || age < 5 || age > 110) {
      ++out.report.users_rejected;
      out.report.note("user " + id + ": age '" + parts[2] + "' outside [5, 110]");
      continue;
    }
    // location "city, state, country" -> country only
    const auto comma = parts[1].rfind(',');
    std::string country =
        detail::trim(comma == std::string::npos ? parts[1] : parts[1].substr(comma + 1));
    std::transform(country.begin(), country.end(), country.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (country.empty() || country == "n/a") {
      ++out.report.users_rejected;
      out.report.note("user " + id + ": no country information");
      continue;
    }
    raw_users.push_back(RawProfileRow{id, {std::to_string(age), country}});
    countries.insert(country);
    kept_users.insert(id);
    ++out.report.users_parsed;
  }

  std::vector<RawProfileRow> raw_items;
  for (const auto& line : lines_of(items_path)) {
    auto parts = csv_split(line, ';');
    if (parts.size() < 5) {
      ++out.report.items_rejected;
      out.report.note("item row with " + std::to_string(parts.size()) + " fields");
      continue;
    }
    const std::string& id = parts[0];
    const std::string author = detail::trim(parts[2]);
    long long year = 0;
    const std::string publisher = detail::trim(parts[4]);
    if (!detail::parse_int(parts[3], year) || year < 1500 || year > 2010 || author.empty() ||
        publisher.empty()) {
      ++out.report.items_rejected;
      out.report.note("item " + id + ": invalid year, author or publisher");
      continue;
    }
    raw_items.push_back(RawProfileRow{id, {std::to_string(year), author, publisher}});
    authors.insert(author);
    publishers.insert(publisher);
    kept_items.insert(id);
    ++out.report.items_parsed;
  }

  out.schema.user_fields[1].vocab.assign(countries.begin(), countries.end());
  out.schema.item_fields[1].vocab.assign(authors.begin(), authors.end());
  out.schema.item_fields[2].vocab.assign(publishers.begin(), publishers.end());
  out.users = std::move(raw_users);
  out.items = std::move(raw_items);

  std::int64_t order = 0;
  for (const auto& line : lines_of(ratings_path)) {
    auto parts = csv_split(line, ';');
    long long rating = 0;
    if (parts.size() != 3 || !detail::parse_int(parts[2], rating)) {
      ++out.report.ratings_rejected;
      out.report.note("malformed rating row: " + line);
      continue;
    }
    ++order;  // line order stands in for the missing review time
    if (rating < 1 || rating > 10 || !kept_users.contains(parts[0]) ||
        !kept_items.contains(parts[1])) {
      ++out.report.ratings_rejected;
      continue;
    }
    out.records.push_back(RatingRecord{parts[0], parts[1], static_cast<double>(rating), order});
    ++out.report.ratings_kept;
  }
  return out;
}

}  // namespace mamo

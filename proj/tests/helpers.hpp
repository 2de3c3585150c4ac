#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mamo/data.hpp"
#include "mamo/matrix.hpp"
#include "mamo/store.hpp"
#include "mamo/synthetic.hpp"

namespace test_helpers {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mamo_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool same_bytes(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Encode a synthetic dataset in memory and build one episode per user.
struct InMemoryDataset {
  mamo::Schema schema;
  std::vector<mamo::ProfileVector> item_profiles;
  std::vector<mamo::Episode> episodes;  // canonical user order
};

inline InMemoryDataset episodes_from_synthetic(const mamo::SyntheticData& data,
                                               std::size_t support_size, std::size_t cap) {
  InMemoryDataset out;
  out.schema = data.schema;
  std::unordered_map<std::string, std::size_t> item_index;
  for (const auto& item : data.items) {
    item_index.emplace(item.id, out.item_profiles.size());
    out.item_profiles.push_back(mamo::encode_item(item.values, data.schema));
  }
  std::unordered_map<std::string, std::vector<std::pair<mamo::SupportItem, std::string>>> by_user;
  for (const auto& rec : data.records) {
    by_user[rec.user_id].push_back(
        {mamo::SupportItem{item_index.at(rec.item_id), rec.rating, rec.order_key}, rec.item_id});
  }
  for (const auto& user : data.users) {
    auto it = by_user.find(user.id);
    if (it == by_user.end()) continue;
    std::vector<mamo::SupportItem> items;
    std::vector<std::string> ids;
    for (auto& [si, id] : it->second) {
      items.push_back(si);
      ids.push_back(id);
    }
    auto ep = mamo::make_episode(user.id, mamo::encode_user(user.values, data.schema),
                                 std::move(items), ids, support_size, cap);
    if (ep) out.episodes.push_back(std::move(*ep));
  }
  return out;
}

inline mamo::Vec random_vec(std::size_t n, mamo::Rng& rng, double lo = -1.0, double hi = 1.0) {
  mamo::Vec v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline mamo::Matrix random_matrix(std::size_t r, std::size_t c, mamo::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  mamo::Matrix m(r, c);
  for (double& x : m.data) x = rng.uniform(lo, hi);
  return m;
}

}  // namespace test_helpers

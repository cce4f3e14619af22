#pragma once

// Interaction ingestion, chronological user sequences, leave-one-out split
// and item popularity.

#include "unit/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace unit::dataset {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

struct CatalogItem {
  int index = 0;
  std::string external_id;
  std::string description;

  bool operator==(const CatalogItem&) const = default;
};

class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<CatalogItem> items);

  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] const std::vector<CatalogItem>& items() const { return items_; }
  [[nodiscard]] const CatalogItem& at(int index) const { return items_.at(static_cast<std::size_t>(index)); }
  // Returns -1 when the id is unknown.
  [[nodiscard]] int index_of(const std::string& external_id) const;

  bool operator==(const ItemCatalog& o) const { return items_ == o.items_; }

 private:
  std::vector<CatalogItem> items_;
  std::map<std::string, int> by_id_;
};

struct UserSequence {
  std::string user_id;
  std::vector<int> items;

  bool operator==(const UserSequence&) const = default;
};

struct SplitUser {
  std::string user_id;
  std::vector<int> train;
  int target = -1;

  bool operator==(const SplitUser&) const = default;
};

struct DatasetSplit {
  std::vector<SplitUser> users;

  bool operator==(const DatasetSplit&) const = default;
};

struct PopularityTable {
  std::vector<std::int64_t> counts;
  std::vector<double> p;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double average_length = 0.0;
  double density = 0.0;
};

// external item id -> description text
using ItemTexts = std::map<std::string, std::string>;

std::vector<Interaction> load_interactions_jsonl(const std::filesystem::path& path);
ItemTexts load_item_texts_jsonl(const std::filesystem::path& path);

struct MovieLensData {
  std::vector<Interaction> interactions;
  ItemTexts texts;
};
MovieLensData load_movielens(const std::filesystem::path& ratings_path,
                             const std::filesystem::path& movies_path);

struct SequenceData {
  ItemCatalog catalog;
  std::vector<UserSequence> sequences;
};

// Users are emitted in first-appearance order; catalog indices follow the
// first appearance of each item across surviving sequences.
SequenceData build_sequences(const std::vector<Interaction>& interactions, const ItemTexts& texts,
                             int min_seq_len = 3);

DatasetSplit leave_one_out_split(const std::vector<UserSequence>& sequences);
std::vector<UserSequence> reconstruct_sequences(const DatasetSplit& split);

PopularityTable compute_popularity(const DatasetSplit& split, std::size_t n_items, double floor = 0.01);
PopularityTable compute_popularity(const std::vector<std::vector<int>>& train_sequences, std::size_t n_items,
                                   double floor = 0.01);

DatasetStats dataset_stats(const std::vector<UserSequence>& sequences, const ItemCatalog& catalog);

// JSON persistence of ingest outputs.
void write_catalog(const ItemCatalog& catalog, const std::filesystem::path& path);
ItemCatalog read_catalog(const std::filesystem::path& path);
void write_sequences(const std::vector<UserSequence>& sequences, const std::filesystem::path& path);
void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split(const std::filesystem::path& path);
void write_popularity(const PopularityTable& pop, const std::filesystem::path& path);
PopularityTable read_popularity(const std::filesystem::path& path);
void write_stats(const DatasetStats& stats, const std::filesystem::path& path);

void write_interactions_jsonl(const std::vector<Interaction>& interactions, const std::filesystem::path& path);
void write_item_texts_jsonl(const ItemTexts& texts, const std::filesystem::path& path);

}  // namespace unit::dataset

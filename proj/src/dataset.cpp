#include "unit/dataset.hpp"

#include "unit/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <cctype>
#include <unordered_map>

namespace unit::dataset {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string line_error(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  return path.filename().string() + " line " + std::to_string(line_no) + ": " + what;
}

std::string require_string(const json& obj, const char* key, const std::filesystem::path& path,
                           std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(line_error(path, line_no, std::string("missing key \"") + key + "\""));
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw Error(line_error(path, line_no, std::string("key \"") + key + "\" must be a string"));
}

// Splits on the two-character MovieLens delimiter.
std::vector<std::string> split_double_colon(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find("::", start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
}

std::int64_t parse_int(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw Error(context + ": not an integer: \"" + s + "\"");
  }
  if (used != s.size()) throw Error(context + ": not an integer: \"" + s + "\"");
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

ItemCatalog::ItemCatalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].index != static_cast<int>(i)) throw Error("catalog indices must be contiguous from 0");
    if (!by_id_.emplace(items_[i].external_id, items_[i].index).second) {
      throw Error("duplicate catalog id " + items_[i].external_id);
    }
  }
}

int ItemCatalog::index_of(const std::string& external_id) const {
  auto it = by_id_.find(external_id);
  return it == by_id_.end() ? -1 : it->second;
}

std::vector<Interaction> load_interactions_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(line_error(path, line_no, std::string("malformed JSON: ") + e.what()));
    }
    if (!obj.is_object()) throw Error(line_error(path, line_no, "expected a JSON object"));
    Interaction rec;
    rec.user_id = require_string(obj, "user", path, line_no);
    rec.item_id = require_string(obj, "item", path, line_no);
    auto ts = obj.find("timestamp");
    if (ts == obj.end()) throw Error(line_error(path, line_no, "missing key \"timestamp\""));
    if (!ts->is_number_integer()) throw Error(line_error(path, line_no, "key \"timestamp\" must be an integer"));
    rec.timestamp = ts->get<std::int64_t>();
    if (rec.user_id.empty() || rec.item_id.empty()) throw Error(line_error(path, line_no, "empty user or item id"));
    out.push_back(std::move(rec));
  }
  return out;
}

ItemTexts load_item_texts_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  ItemTexts out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(line_error(path, line_no, std::string("malformed JSON: ") + e.what()));
    }
    if (!obj.is_object()) throw Error(line_error(path, line_no, "expected a JSON object"));
    auto id = require_string(obj, "item", path, line_no);
    auto text = require_string(obj, "text", path, line_no);
    out[id] = std::move(text);
  }
  return out;
}

MovieLensData load_movielens(const std::filesystem::path& ratings_path, const std::filesystem::path& movies_path) {
  MovieLensData data;
  {
    auto in = open_input(ratings_path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      line = strip_cr(line);
      if (is_blank(line)) continue;
      const auto fields = split_double_colon(line);
      const std::string ctx = ratings_path.filename().string() + " row " + std::to_string(row);
      if (fields.size() != 4) {
        throw Error(ctx + ": expected 4 fields user::item::rating::timestamp, got " + std::to_string(fields.size()));
      }
      if (fields[0].empty() || fields[1].empty()) throw Error(ctx + ": empty user or item id");
      data.interactions.push_back({fields[0], fields[1], parse_int(fields[3], ctx)});
    }
  }
  {
    auto in = open_input(movies_path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      line = strip_cr(line);
      if (is_blank(line)) continue;
      const auto fields = split_double_colon(line);
      if (fields.size() != 3) {
        throw Error(movies_path.filename().string() + " row " + std::to_string(row) +
                    ": expected 3 fields item::title::genres, got " + std::to_string(fields.size()));
      }
      data.texts[fields[0]] = fields[1] + " " + fields[2];
    }
  }
  return data;
}

SequenceData build_sequences(const std::vector<Interaction>& interactions, const ItemTexts& texts, int min_seq_len) {
  if (min_seq_len < 2) throw Error("min_seq_len must be >= 2");

  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<std::size_t>> per_user;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    auto [it, inserted] = per_user.try_emplace(interactions[i].user_id);
    if (inserted) user_order.push_back(interactions[i].user_id);
    it->second.push_back(i);
  }

  SequenceData out;
  std::vector<CatalogItem> items;
  std::unordered_map<std::string, int> item_index;
  for (const auto& user : user_order) {
    auto& events = per_user[user];
    if (static_cast<int>(events.size()) < min_seq_len) continue;
    std::stable_sort(events.begin(), events.end(), [&](std::size_t a, std::size_t b) {
      return interactions[a].timestamp < interactions[b].timestamp;
    });
    UserSequence seq{user, {}};
    seq.items.reserve(events.size());
    for (std::size_t e : events) {
      const auto& id = interactions[e].item_id;
      auto found = item_index.find(id);
      if (found == item_index.end()) {
        auto text = texts.find(id);
        if (text == texts.end()) throw Error("item " + id + " has no text entry");
        const int idx = static_cast<int>(items.size());
        items.push_back({idx, id, text->second});
        found = item_index.emplace(id, idx).first;
      }
      seq.items.push_back(found->second);
    }
    out.sequences.push_back(std::move(seq));
  }
  out.catalog = ItemCatalog(std::move(items));
  return out;
}

DatasetSplit leave_one_out_split(const std::vector<UserSequence>& sequences) {
  DatasetSplit split;
  split.users.reserve(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.items.size() < 2) {
      throw Error("user " + seq.user_id + " has a sequence of length " + std::to_string(seq.items.size()) +
                  "; leave-one-out needs at least 2");
    }
    SplitUser u;
    u.user_id = seq.user_id;
    u.train.assign(seq.items.begin(), seq.items.end() - 1);
    u.target = seq.items.back();
    split.users.push_back(std::move(u));
  }
  return split;
}

std::vector<UserSequence> reconstruct_sequences(const DatasetSplit& split) {
  std::vector<UserSequence> out;
  out.reserve(split.users.size());
  for (const auto& u : split.users) {
    UserSequence s{u.user_id, u.train};
    s.items.push_back(u.target);
    out.push_back(std::move(s));
  }
  return out;
}

PopularityTable compute_popularity(const std::vector<std::vector<int>>& train_sequences, std::size_t n_items,
                                   double floor) {
  if (!(floor > 0.0)) throw Error("popularity floor must be positive");
  PopularityTable pop;
  pop.counts.assign(n_items, 0);
  for (const auto& seq : train_sequences) {
    for (int item : seq) {
      if (item < 0 || static_cast<std::size_t>(item) >= n_items) throw Error("item index out of range in popularity");
      ++pop.counts[static_cast<std::size_t>(item)];
    }
  }
  std::int64_t total = 0;
  std::size_t positive = 0;
  for (auto c : pop.counts) {
    total += c;
    positive += c > 0 ? 1 : 0;
  }
  if (positive == 0) throw Error("cannot compute popularity: training data is empty");
  const double mean = static_cast<double>(total) / static_cast<double>(positive);
  pop.p.resize(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    pop.p[i] = pop.counts[i] > 0 ? std::max(static_cast<double>(pop.counts[i]) / mean, floor) : floor;
  }
  return pop;
}

PopularityTable compute_popularity(const DatasetSplit& split, std::size_t n_items, double floor) {
  std::vector<std::vector<int>> train;
  train.reserve(split.users.size());
  for (const auto& u : split.users) train.push_back(u.train);
  return compute_popularity(train, n_items, floor);
}

DatasetStats dataset_stats(const std::vector<UserSequence>& sequences, const ItemCatalog& catalog) {
  if (sequences.empty() || catalog.empty()) throw Error("dataset_stats needs at least one sequence and one item");
  DatasetStats s;
  s.users = sequences.size();
  s.items = catalog.size();
  for (const auto& seq : sequences) s.interactions += seq.items.size();
  s.average_length = static_cast<double>(s.interactions) / static_cast<double>(s.users);
  s.density = static_cast<double>(s.interactions) / (static_cast<double>(s.users) * static_cast<double>(s.items));
  return s;
}

// ---------------------------------------------------------------- persistence

void write_catalog(const ItemCatalog& catalog, const std::filesystem::path& path) {
  json items = json::array();
  for (const auto& it : catalog.items()) {
    items.push_back({{"index", it.index}, {"id", it.external_id}, {"text", it.description}});
  }
  open_output(path) << json{{"items", items}}.dump(1) << "\n";
}

ItemCatalog read_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  json doc;
  try {
    doc = json::parse(in);
    std::vector<CatalogItem> items;
    for (const auto& it : doc.at("items")) {
      items.push_back({it.at("index").get<int>(), it.at("id").get<std::string>(), it.at("text").get<std::string>()});
    }
    return ItemCatalog(std::move(items));
  } catch (const json::exception& e) {
    throw Error("malformed catalog " + path.string() + ": " + e.what());
  }
}

void write_sequences(const std::vector<UserSequence>& sequences, const std::filesystem::path& path) {
  json users = json::array();
  for (const auto& s : sequences) users.push_back({{"id", s.user_id}, {"items", s.items}});
  open_output(path) << json{{"users", users}}.dump() << "\n";
}

void write_split(const DatasetSplit& split, const std::filesystem::path& path) {
  json users = json::array();
  for (const auto& u : split.users) users.push_back({{"id", u.user_id}, {"train", u.train}, {"target", u.target}});
  open_output(path) << json{{"users", users}}.dump() << "\n";
}

DatasetSplit read_split(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    const json doc = json::parse(in);
    DatasetSplit split;
    for (const auto& u : doc.at("users")) {
      split.users.push_back({u.at("id").get<std::string>(), u.at("train").get<std::vector<int>>(),
                             u.at("target").get<int>()});
    }
    return split;
  } catch (const json::exception& e) {
    throw Error("malformed split manifest " + path.string() + ": " + e.what());
  }
}

void write_popularity(const PopularityTable& pop, const std::filesystem::path& path) {
  open_output(path) << json{{"counts", pop.counts}, {"p", pop.p}}.dump() << "\n";
}

PopularityTable read_popularity(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    const json doc = json::parse(in);
    PopularityTable pop;
    pop.counts = doc.at("counts").get<std::vector<std::int64_t>>();
    pop.p = doc.at("p").get<std::vector<double>>();
    if (pop.counts.size() != pop.p.size()) throw Error("popularity counts and p differ in length");
    return pop;
  } catch (const json::exception& e) {
    throw Error("malformed popularity file " + path.string() + ": " + e.what());
  }
}

void write_stats(const DatasetStats& stats, const std::filesystem::path& path) {
  open_output(path) << json{{"users", stats.users},
                            {"items", stats.items},
                            {"interactions", stats.interactions},
                            {"average_length", stats.average_length},
                            {"density", stats.density}}
                           .dump(1)
                    << "\n";
}

void write_interactions_jsonl(const std::vector<Interaction>& interactions, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& r : interactions) {
    out << json{{"user", r.user_id}, {"item", r.item_id}, {"timestamp", r.timestamp}}.dump() << "\n";
  }
}

void write_item_texts_jsonl(const ItemTexts& texts, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [id, text] : texts) out << json{{"item", id}, {"text", text}}.dump() << "\n";
}

}  // namespace unit::dataset

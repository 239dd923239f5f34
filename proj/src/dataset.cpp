#include "fairrank/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "fairrank/format.hpp"
#include "fairrank/rng.hpp"

namespace fairrank {

namespace {

[[noreturn]] void fail_line(const std::string& path, std::size_t line_no, const std::string& msg) {
  throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + msg);
}

int parse_binary(std::string_view text, const std::string& path, std::size_t line_no,
                 const char* what) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  fail_line(path, line_no, std::string(what) + " must be 0 or 1, got '" + std::string(text) + "'");
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

class GroupBuilder {
 public:
  explicit GroupBuilder(Dataset& data) : data_(data) {}

  void add(ItemRecord item, const std::string& path, std::size_t line_no) {
    if (!item.features.empty()) {
      for (double f : item.features)
        if (!std::isfinite(f)) fail_line(path, line_no, "non-finite feature value");
    }
    if (data_.queries.empty() && data_.feature_dim == 0)
      data_.feature_dim = item.features.size();
    if (item.features.size() != data_.feature_dim)
      fail_line(path, line_no,
                "feature dimension " + std::to_string(item.features.size()) + " does not match " +
                    std::to_string(data_.feature_dim));
    auto [it, inserted] = index_.try_emplace(item.query_id, data_.queries.size());
    if (inserted) data_.queries.push_back(QueryGroup{item.query_id, {}});
    QueryGroup& group = data_.queries[it->second];
    if (!seen_.insert(item.query_id + "\x1f" + item.doc_id).second)
      fail_line(path, line_no, "duplicate doc_id '" + item.doc_id + "' in query '" + item.query_id + "'");
    group.items.push_back(std::move(item));
  }

 private:
  Dataset& data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_set<std::string> seen_;
};

Dataset load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Dataset data;
  GroupBuilder builder(data);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip(line);
    if (view.empty() || view.front() == '#') continue;
    // Split the raw line: stripping first would swallow empty leading fields.
    auto fields = split(std::string_view(line), '\t');
    if (fields.size() != 5)
      fail_line(path, line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    ItemRecord item;
    item.query_id = std::string(strip(fields[0]));
    item.doc_id = std::string(strip(fields[1]));
    if (item.query_id.empty() || item.doc_id.empty()) fail_line(path, line_no, "empty id field");
    item.relevance = parse_binary(strip(fields[2]), path, line_no, "relevance");
    item.protected_attr = parse_binary(strip(fields[3]), path, line_no, "protected");
    for (std::string_view f : split(strip(fields[4]), ','))
      item.features.push_back(parse_double(strip(f), path + ":" + std::to_string(line_no)));
    builder.add(std::move(item), path, line_no);
  }
  return data;
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Dataset data;
  GroupBuilder builder(data);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip(line);
    if (view.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(view);
    } catch (const nlohmann::json::exception& e) {
      fail_line(path, line_no, e.what());
    }
    if (!obj.is_object()) fail_line(path, line_no, "expected a JSON object");
    for (const char* key : {"query_id", "doc_id", "relevance", "protected", "features"})
      if (!obj.contains(key)) fail_line(path, line_no, std::string("missing key '") + key + "'");
    ItemRecord item;
    if (!obj["query_id"].is_string() || !obj["doc_id"].is_string())
      fail_line(path, line_no, "query_id and doc_id must be strings");
    item.query_id = obj["query_id"].get<std::string>();
    item.doc_id = obj["doc_id"].get<std::string>();
    if (item.query_id.empty() || item.doc_id.empty()) fail_line(path, line_no, "empty id field");
    for (const char* key : {"relevance", "protected"}) {
      const auto& v = obj[key];
      if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1))
        fail_line(path, line_no, std::string(key) + " must be 0 or 1");
    }
    item.relevance = obj["relevance"].get<int>();
    item.protected_attr = obj["protected"].get<int>();
    if (!obj["features"].is_array()) fail_line(path, line_no, "features must be an array");
    for (const auto& f : obj["features"]) {
      if (!f.is_number()) fail_line(path, line_no, "features must be numbers");
      item.features.push_back(f.get<double>());
    }
    builder.add(std::move(item), path, line_no);
  }
  return data;
}

void save_tsv(const Dataset& data, std::ostream& out) {
  for (const QueryGroup& group : data.queries) {
    for (const ItemRecord& item : group.items) {
      out << item.query_id << '\t' << item.doc_id << '\t' << item.relevance << '\t'
          << item.protected_attr << '\t';
      for (std::size_t i = 0; i < item.features.size(); ++i) {
        if (i) out << ',';
        out << format_double(item.features[i]);
      }
      out << '\n';
    }
  }
}

void save_jsonl(const Dataset& data, std::ostream& out) {
  for (const QueryGroup& group : data.queries) {
    for (const ItemRecord& item : group.items) {
      nlohmann::json obj;
      obj["query_id"] = item.query_id;
      obj["doc_id"] = item.doc_id;
      obj["relevance"] = item.relevance;
      obj["protected"] = item.protected_attr;
      obj["features"] = item.features;
      out << obj.dump() << '\n';
    }
  }
}

Dataset subset_by_flags(const Dataset& data, const std::vector<char>& keep) {
  Dataset out;
  out.feature_dim = data.feature_dim;
  for (std::size_t q = 0; q < data.queries.size(); ++q)
    if (keep[q]) out.queries.push_back(data.queries[q]);
  return out;
}

}  // namespace

std::size_t Dataset::total_items() const {
  std::size_t n = 0;
  for (const QueryGroup& group : queries) n += group.items.size();
  return n;
}

FileFormat format_from_path(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".jsonl") || ends_with(".json")) return FileFormat::jsonl;
  return FileFormat::tsv;
}

Dataset load_dataset(const std::string& path, FileFormat format) {
  Dataset data = format == FileFormat::tsv ? load_tsv(path) : load_jsonl(path);
  validate_dataset(data);
  return data;
}

void save_dataset(const Dataset& data, const std::string& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (format == FileFormat::tsv)
    save_tsv(data, out);
  else
    save_jsonl(data, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

void validate_dataset(const Dataset& data) {
  for (const QueryGroup& group : data.queries) {
    if (group.items.empty())
      throw std::invalid_argument("query '" + group.query_id + "' has no items");
    std::unordered_set<std::string> docs;
    for (const ItemRecord& item : group.items) {
      if (item.query_id != group.query_id)
        throw std::invalid_argument("item query_id '" + item.query_id +
                                    "' does not match group '" + group.query_id + "'");
      if (!docs.insert(item.doc_id).second)
        throw std::invalid_argument("duplicate doc_id '" + item.doc_id + "' in query '" +
                                    group.query_id + "'");
      if (item.features.size() != data.feature_dim)
        throw std::invalid_argument("inconsistent feature dimension in query '" +
                                    group.query_id + "'");
      if (item.relevance != 0 && item.relevance != 1)
        throw std::invalid_argument("non-binary relevance in query '" + group.query_id + "'");
      if (item.protected_attr != 0 && item.protected_attr != 1)
        throw std::invalid_argument("non-binary protected attribute in query '" +
                                    group.query_id + "'");
      for (double f : item.features)
        if (!std::isfinite(f))
          throw std::invalid_argument("non-finite feature in query '" + group.query_id + "'");
    }
  }
}

StandardizationStats compute_standardization(const Dataset& data) {
  const std::size_t dim = data.feature_dim;
  const std::size_t n = data.total_items();
  if (n == 0) throw std::invalid_argument("cannot standardize an empty dataset");
  StandardizationStats stats;
  stats.mean.assign(dim, 0.0);
  stats.stddev.assign(dim, 0.0);
  for (const QueryGroup& group : data.queries)
    for (const ItemRecord& item : group.items)
      for (std::size_t j = 0; j < dim; ++j) stats.mean[j] += item.features[j];
  for (std::size_t j = 0; j < dim; ++j) stats.mean[j] /= static_cast<double>(n);
  for (const QueryGroup& group : data.queries)
    for (const ItemRecord& item : group.items)
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = item.features[j] - stats.mean[j];
        stats.stddev[j] += d * d;
      }
  for (std::size_t j = 0; j < dim; ++j) {
    stats.stddev[j] = std::sqrt(stats.stddev[j] / static_cast<double>(n));
    if (stats.stddev[j] == 0.0) stats.stddev[j] = 1.0;
  }
  return stats;
}

Dataset apply_standardization(const Dataset& data, const StandardizationStats& stats) {
  if (stats.mean.size() != data.feature_dim || stats.stddev.size() != data.feature_dim)
    throw std::invalid_argument("standardization stats dimension mismatch");
  Dataset out = data;
  for (QueryGroup& group : out.queries)
    for (ItemRecord& item : group.items)
      for (std::size_t j = 0; j < out.feature_dim; ++j)
        item.features[j] = (item.features[j] - stats.mean[j]) / stats.stddev[j];
  return out;
}

std::pair<Dataset, StandardizationStats> standardize(const Dataset& data) {
  StandardizationStats stats = compute_standardization(data);
  return {apply_standardization(data, stats), stats};
}

std::vector<FoldSplit> split_folds(const Dataset& data, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw std::invalid_argument("k_folds must be at least 2");
  if (data.num_queries() < k_folds)
    throw std::invalid_argument("need at least " + std::to_string(k_folds) + " queries for " +
                                std::to_string(k_folds) + " folds");
  std::vector<std::size_t> order(data.num_queries());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold_of(data.num_queries());
  for (std::size_t pos = 0; pos < order.size(); ++pos) fold_of[order[pos]] = pos % k_folds;
  std::vector<FoldSplit> splits(k_folds);
  for (std::size_t f = 0; f < k_folds; ++f) {
    std::vector<char> in_test(data.num_queries()), in_train(data.num_queries());
    for (std::size_t q = 0; q < data.num_queries(); ++q) {
      in_test[q] = fold_of[q] == f;
      in_train[q] = !in_test[q];
    }
    splits[f].train = subset_by_flags(data, in_train);
    splits[f].test = subset_by_flags(data, in_test);
  }
  return splits;
}

FoldSplit holdout_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0, 1)");
  if (data.num_queries() < 2) throw std::invalid_argument("need at least 2 queries to split");
  std::vector<std::size_t> order(data.num_queries());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(data.num_queries())));
  n_test = std::clamp<std::size_t>(n_test, 1, data.num_queries() - 1);
  std::vector<char> in_test(data.num_queries()), in_train(data.num_queries());
  for (std::size_t pos = 0; pos < n_test; ++pos) in_test[order[pos]] = 1;
  for (std::size_t q = 0; q < data.num_queries(); ++q) in_train[q] = !in_test[q];
  FoldSplit split;
  split.train = subset_by_flags(data, in_train);
  split.test = subset_by_flags(data, in_test);
  return split;
}

Dataset add_intercept(const Dataset& data) {
  Dataset out = data;
  out.feature_dim = data.feature_dim + 1;
  for (QueryGroup& group : out.queries)
    for (ItemRecord& item : group.items) item.features.push_back(1.0);
  return out;
}

}  // namespace fairrank

#ifndef FAIRRANK_DATASET_HPP_
#define FAIRRANK_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fairrank {

/// One query-document pair with its judgment and group membership.
struct ItemRecord {
  std::string query_id;
  std::string doc_id;
  std::vector<double> features;
  int relevance = 0;       // binary
  int protected_attr = 0;  // 1 = protected group
};

struct QueryGroup {
  std::string query_id;
  std::vector<ItemRecord> items;
};

struct Dataset {
  std::vector<QueryGroup> queries;
  std::size_t feature_dim = 0;

  std::size_t num_queries() const { return queries.size(); }
  std::size_t total_items() const;
};

enum class FileFormat { tsv, jsonl };

/// Infers tsv/jsonl from the file extension; ".jsonl"/".json" select jsonl.
FileFormat format_from_path(const std::string& path);

Dataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const Dataset& data, const std::string& path, FileFormat format);

/// Throws std::invalid_argument on any structural violation: inconsistent
/// feature dimension, non-binary labels, non-finite features, duplicate
/// (query_id, doc_id) within a query, or an empty query group.
void validate_dataset(const Dataset& data);

/// Per-feature mean and population standard deviation over all items.
/// Constant features get stddev 1 so standardizing them is a pure shift.
struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

StandardizationStats compute_standardization(const Dataset& data);
Dataset apply_standardization(const Dataset& data, const StandardizationStats& stats);
std::pair<Dataset, StandardizationStats> standardize(const Dataset& data);

struct FoldSplit {
  Dataset train;
  Dataset test;
};

/// Query-level k-fold partition. Queries are shuffled with `seed`, dealt
/// round-robin into folds, and each split keeps the original dataset order.
std::vector<FoldSplit> split_folds(const Dataset& data, std::size_t k_folds, std::uint64_t seed);

/// Single shuffled holdout split; `test_fraction` of queries go to test
/// (at least one query on each side).
FoldSplit holdout_split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Appends a constant 1.0 feature to every item (bias term).
Dataset add_intercept(const Dataset& data);

}  // namespace fairrank

#endif  // FAIRRANK_DATASET_HPP_

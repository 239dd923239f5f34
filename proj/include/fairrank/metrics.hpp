#ifndef FAIRRANK_METRICS_HPP_
#define FAIRRANK_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairrank/dataset.hpp"

namespace fairrank {

enum class FairnessKind { eop, dp, eod };

FairnessKind parse_fairness_kind(std::string_view name);
std::string_view fairness_kind_name(FairnessKind kind);

/// One query's evaluation-order list (best first) with per-position labels.
struct RankedQuery {
  std::string query_id;
  std::vector<std::string> doc_ids;
  std::vector<int> relevances;
  std::vector<int> protected_attrs;

  std::size_t size() const { return doc_ids.size(); }
};

/// Orders a query's items by descending score; ties broken by ascending
/// doc_id so the result never depends on the input order.
RankedQuery rank_by_score(const QueryGroup& group, const std::vector<double>& scores);

/// Fraction of relevant items in the top k; lists shorter than k count the
/// missing positions as non-relevant.
double precision_at_k(const RankedQuery& ranked, std::size_t k);

/// Nullopt when the list has no relevant item (such queries carry no rank
/// signal). The ideal DCG truncates at min(k, number of relevant items).
std::optional<double> ndcg_at_k(const RankedQuery& ranked, std::size_t k);

/// Mean over the defined entries; throws if every entry is nullopt.
double mean_metric(const std::vector<std::optional<double>>& values);

/// 1 for positions ranked in the top k, 0 below; length = list length.
std::vector<int> topk_indicator(const RankedQuery& ranked, std::size_t k);

/// Item-level values grouped by (protected, relevance), the input to the
/// fairness measures. Values are model scores or selection indicators.
struct ValueRow {
  int protected_attr;
  int relevance;
  double value;
};

struct ItemValueTable {
  std::vector<ValueRow> rows;
};

/// Pools top-k selection indicators of several ranked lists into one table.
ItemValueTable topk_value_table(const std::vector<RankedQuery>& rankings, std::size_t k);

/// True when every subgroup the measure compares has at least one row.
bool has_required_subgroups(const ItemValueTable& table, FairnessKind kind);

/// Absolute between-group gap of mean values.
///   eop: groups restricted to relevant rows
///   dp:  whole groups
///   eod: average of the per-relevance-level gaps
/// Throws std::invalid_argument naming the missing subgroup if one is empty.
double empirical_fairness(const ItemValueTable& table, FairnessKind kind);

double mean_precision(const std::vector<RankedQuery>& rankings, std::size_t k);
double mean_ndcg(const std::vector<RankedQuery>& rankings, std::size_t k);

/// Ranking quality plus all three fairness measures of the pooled top-k
/// selection, the record the evaluation tools report.
struct EvalRecord {
  std::size_t k = 0;
  double ndcg = 0.0;
  double precision = 0.0;
  double gamma_eop = 0.0;
  double gamma_dp = 0.0;
  double gamma_eod = 0.0;
};

EvalRecord evaluate_rankings(const std::vector<RankedQuery>& rankings, std::size_t k);

}  // namespace fairrank

#endif  // FAIRRANK_METRICS_HPP_

#include "fairrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairrank {

namespace {

struct CellMean {
  double sum = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    count += 1;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

[[noreturn]] void missing_subgroup(int a, int r) {
  std::string cell = "(protected=" + std::to_string(a) +
                     (r < 0 ? ", relevance=any)" : ", relevance=" + std::to_string(r) + ")");
  throw std::invalid_argument("empirical_fairness: no items in subgroup " + cell);
}

}  // namespace

FairnessKind parse_fairness_kind(std::string_view name) {
  if (name == "eop") return FairnessKind::eop;
  if (name == "dp") return FairnessKind::dp;
  if (name == "eod") return FairnessKind::eod;
  throw std::invalid_argument("unknown fairness kind '" + std::string(name) +
                              "' (expected eop, dp, or eod)");
}

std::string_view fairness_kind_name(FairnessKind kind) {
  switch (kind) {
    case FairnessKind::eop: return "eop";
    case FairnessKind::dp: return "dp";
    case FairnessKind::eod: return "eod";
  }
  throw std::invalid_argument("bad fairness kind");
}

RankedQuery rank_by_score(const QueryGroup& group, const std::vector<double>& scores) {
  if (scores.size() != group.items.size())
    throw std::invalid_argument("rank_by_score: got " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(group.items.size()) + " items");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("rank_by_score: non-finite score");
  std::vector<std::size_t> order(group.items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return group.items[a].doc_id < group.items[b].doc_id;
  });
  RankedQuery ranked;
  ranked.query_id = group.query_id;
  ranked.doc_ids.reserve(order.size());
  ranked.relevances.reserve(order.size());
  ranked.protected_attrs.reserve(order.size());
  for (std::size_t idx : order) {
    const ItemRecord& item = group.items[idx];
    ranked.doc_ids.push_back(item.doc_id);
    ranked.relevances.push_back(item.relevance);
    ranked.protected_attrs.push_back(item.protected_attr);
  }
  return ranked;
}

double precision_at_k(const RankedQuery& ranked, std::size_t k) {
  if (k == 0) throw std::invalid_argument("precision_at_k: k must be positive");
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t j = 0; j < depth; ++j) hits += ranked.relevances[j] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> ndcg_at_k(const RankedQuery& ranked, std::size_t k) {
  if (k == 0) throw std::invalid_argument("ndcg_at_k: k must be positive");
  const std::size_t n_relevant = static_cast<std::size_t>(
      std::count(ranked.relevances.begin(), ranked.relevances.end(), 1));
  if (n_relevant == 0) return std::nullopt;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t j = 0; j < depth; ++j)
    if (ranked.relevances[j]) dcg += 1.0 / std::log2(static_cast<double>(j) + 2.0);
  double ideal = 0.0;
  const std::size_t ideal_depth = std::min(k, n_relevant);
  for (std::size_t j = 0; j < ideal_depth; ++j)
    ideal += 1.0 / std::log2(static_cast<double>(j) + 2.0);
  return dcg / ideal;
}

double mean_metric(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      count += 1;
    }
  if (count == 0) throw std::invalid_argument("mean_metric: no defined values");
  return sum / static_cast<double>(count);
}

std::vector<int> topk_indicator(const RankedQuery& ranked, std::size_t k) {
  if (k == 0) throw std::invalid_argument("topk_indicator: k must be positive");
  std::vector<int> ind(ranked.size(), 0);
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t j = 0; j < depth; ++j) ind[j] = 1;
  return ind;
}

ItemValueTable topk_value_table(const std::vector<RankedQuery>& rankings, std::size_t k) {
  ItemValueTable table;
  for (const RankedQuery& ranked : rankings) {
    const std::vector<int> ind = topk_indicator(ranked, k);
    for (std::size_t j = 0; j < ranked.size(); ++j)
      table.rows.push_back(
          ValueRow{ranked.protected_attrs[j], ranked.relevances[j], static_cast<double>(ind[j])});
  }
  return table;
}

bool has_required_subgroups(const ItemValueTable& table, FairnessKind kind) {
  bool cell[2][2] = {{false, false}, {false, false}};
  for (const ValueRow& row : table.rows) cell[row.protected_attr][row.relevance] = true;
  switch (kind) {
    case FairnessKind::eop: return cell[0][1] && cell[1][1];
    case FairnessKind::dp: return (cell[0][0] || cell[0][1]) && (cell[1][0] || cell[1][1]);
    case FairnessKind::eod: return cell[0][0] && cell[0][1] && cell[1][0] && cell[1][1];
  }
  return false;
}

double empirical_fairness(const ItemValueTable& table, FairnessKind kind) {
  for (const ValueRow& row : table.rows) {
    if ((row.protected_attr != 0 && row.protected_attr != 1) ||
        (row.relevance != 0 && row.relevance != 1))
      throw std::invalid_argument("empirical_fairness: labels must be binary");
    if (!std::isfinite(row.value))
      throw std::invalid_argument("empirical_fairness: non-finite value");
  }
  // Means accumulate in row order so results match any caller that sums the
  // same rows in the same order.
  auto group_mean = [&](int a, int r) {
    CellMean acc;
    for (const ValueRow& row : table.rows)
      if (row.protected_attr == a && (r < 0 || row.relevance == r)) acc.add(row.value);
    if (acc.count == 0) missing_subgroup(a, r);
    return acc.mean();
  };
  switch (kind) {
    case FairnessKind::eop:
      return std::abs(group_mean(0, 1) - group_mean(1, 1));
    case FairnessKind::dp:
      return std::abs(group_mean(0, -1) - group_mean(1, -1));
    case FairnessKind::eod: {
      const double gap0 = std::abs(group_mean(0, 0) - group_mean(1, 0));
      const double gap1 = std::abs(group_mean(0, 1) - group_mean(1, 1));
      return 0.5 * (gap0 + gap1);
    }
  }
  throw std::invalid_argument("bad fairness kind");
}

double mean_precision(const std::vector<RankedQuery>& rankings, std::size_t k) {
  if (rankings.empty()) throw std::invalid_argument("mean_precision: no queries");
  double sum = 0.0;
  for (const RankedQuery& ranked : rankings) sum += precision_at_k(ranked, k);
  return sum / static_cast<double>(rankings.size());
}

double mean_ndcg(const std::vector<RankedQuery>& rankings, std::size_t k) {
  std::vector<std::optional<double>> values;
  values.reserve(rankings.size());
  for (const RankedQuery& ranked : rankings) values.push_back(ndcg_at_k(ranked, k));
  return mean_metric(values);
}

EvalRecord evaluate_rankings(const std::vector<RankedQuery>& rankings, std::size_t k) {
  EvalRecord record;
  record.k = k;
  record.ndcg = mean_ndcg(rankings, k);
  record.precision = mean_precision(rankings, k);
  const ItemValueTable table = topk_value_table(rankings, k);
  record.gamma_eop = empirical_fairness(table, FairnessKind::eop);
  record.gamma_dp = empirical_fairness(table, FairnessKind::dp);
  record.gamma_eod = empirical_fairness(table, FairnessKind::eod);
  return record;
}

}  // namespace fairrank

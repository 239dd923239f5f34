#ifndef FAIRRANK_FAIR_RERANK_HPP_
#define FAIRRANK_FAIR_RERANK_HPP_

#include <cstddef>
#include <vector>

#include "fairrank/metrics.hpp"
#include "fairrank/training.hpp"

namespace fairrank {

/// P(X <= t) for X ~ Binomial(n, p). Computed in extended precision via
/// log-space summation so it stays accurate for large n and extreme p.
double binomial_cdf(std::size_t t, std::size_t n, double p);

/// min_protected[i-1] is the smallest number of protected items a prefix of
/// length i may contain: the smallest t with binomial_cdf(t, i, p) >= alpha_q,
/// i.e. a one-sided binomial test at level alpha_q against proportion p.
struct QuantileTable {
  std::size_t k_max = 0;
  double p = 0.5;
  double alpha_q = 0.1;
  std::vector<std::size_t> min_protected;
};

QuantileTable min_protected_table(std::size_t k_max, double p, double alpha_q);

struct RerankResult {
  RankedQuery ranking;
  bool infeasible = false;  // ran out of protected items for some prefix
};

/// Greedy stable re-ranking: walk the output positions, take the best-ranked
/// remaining item unless the prefix constraint forces the best-ranked
/// remaining protected item. Relative order within each group is preserved.
/// When the constraint cannot be met the result is flagged and filled with
/// the best remaining items. Requires table.k_max >= list length.
RerankResult fair_rerank(const RankedQuery& ranked, const QuantileTable& table);

struct RerankReport {
  std::vector<RankedQuery> rankings;
  std::size_t infeasible_queries = 0;
  EvalRecord record;
};

/// Scores the data with the model, re-ranks every query, then evaluates the
/// re-ranked lists against the true relevance labels at cutoff k.
RerankReport rerank_pipeline(const LinearModel& model, const Dataset& data,
                             const QuantileTable& table, std::size_t k);

}  // namespace fairrank

#endif  // FAIRRANK_FAIR_RERANK_HPP_

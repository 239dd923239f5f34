#include "fairrank/fair_rerank.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairrank {

namespace {

// log C(n, i) + i log p + (n - i) log(1 - p), all in long double.
long double log_pmf(std::size_t i, std::size_t n, long double log_p, long double log_q) {
  const long double ld_n = static_cast<long double>(n);
  const long double ld_i = static_cast<long double>(i);
  const long double lchoose =
      std::lgamma(ld_n + 1.0L) - std::lgamma(ld_i + 1.0L) - std::lgamma(ld_n - ld_i + 1.0L);
  return lchoose + ld_i * log_p + (ld_n - ld_i) * log_q;
}

double cdf_from_log_terms(const std::vector<long double>& log_terms) {
  long double max_term = log_terms.front();
  for (long double t : log_terms) max_term = std::max(max_term, t);
  long double sum = 0.0L;
  for (long double t : log_terms) sum += std::exp(t - max_term);
  const long double value = std::exp(max_term + std::log(sum));
  return static_cast<double>(std::min(value, 1.0L));
}

}  // namespace

double binomial_cdf(std::size_t t, std::size_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_cdf: p must be in [0, 1]");
  if (t >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_q = std::log1p(static_cast<long double>(-p));
  std::vector<long double> log_terms;
  log_terms.reserve(t + 1);
  for (std::size_t i = 0; i <= t; ++i) log_terms.push_back(log_pmf(i, n, log_p, log_q));
  return cdf_from_log_terms(log_terms);
}

QuantileTable min_protected_table(std::size_t k_max, double p, double alpha_q) {
  if (k_max == 0) throw std::invalid_argument("min_protected_table: k_max must be positive");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("min_protected_table: p must be in (0, 1)");
  if (!(alpha_q > 0.0 && alpha_q < 1.0))
    throw std::invalid_argument("min_protected_table: alpha_q must be in (0, 1)");
  QuantileTable table;
  table.k_max = k_max;
  table.p = p;
  table.alpha_q = alpha_q;
  table.min_protected.reserve(k_max);
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_q = std::log1p(static_cast<long double>(-p));
  for (std::size_t n = 1; n <= k_max; ++n) {
    // Prefix-sum the pmf until the test accepts; the cdf is monotone in t.
    std::vector<long double> log_terms;
    std::size_t threshold = n;
    for (std::size_t t = 0; t <= n; ++t) {
      log_terms.push_back(log_pmf(t, n, log_p, log_q));
      if (cdf_from_log_terms(log_terms) >= alpha_q) {
        threshold = t;
        break;
      }
    }
    table.min_protected.push_back(threshold);
  }
  return table;
}

RerankResult fair_rerank(const RankedQuery& ranked, const QuantileTable& table) {
  const std::size_t n = ranked.size();
  if (table.min_protected.size() != table.k_max)
    throw std::invalid_argument("fair_rerank: malformed quantile table");
  if (table.k_max < n)
    throw std::invalid_argument("fair_rerank: table covers prefixes up to " +
                                std::to_string(table.k_max) + " but the list has " +
                                std::to_string(n) + " items");
  std::vector<std::size_t> protected_queue, other_queue;
  for (std::size_t j = 0; j < n; ++j)
    (ranked.protected_attrs[j] ? protected_queue : other_queue).push_back(j);

  RerankResult result;
  result.ranking.query_id = ranked.query_id;
  std::size_t next_protected = 0, next_other = 0, placed_protected = 0;
  for (std::size_t pos = 1; pos <= n; ++pos) {
    const std::size_t need = table.min_protected[pos - 1];
    const bool have_protected = next_protected < protected_queue.size();
    const bool have_other = next_other < other_queue.size();
    std::size_t pick;
    if (placed_protected < need) {
      if (have_protected) {
        pick = protected_queue[next_protected++];
        placed_protected += 1;
      } else {
        result.infeasible = true;
        pick = other_queue[next_other++];
      }
    } else if (!have_other) {
      pick = protected_queue[next_protected++];
      placed_protected += 1;
    } else if (!have_protected) {
      pick = other_queue[next_other++];
    } else if (protected_queue[next_protected] < other_queue[next_other]) {
      pick = protected_queue[next_protected++];
      placed_protected += 1;
    } else {
      pick = other_queue[next_other++];
    }
    result.ranking.doc_ids.push_back(ranked.doc_ids[pick]);
    result.ranking.relevances.push_back(ranked.relevances[pick]);
    result.ranking.protected_attrs.push_back(ranked.protected_attrs[pick]);
  }
  return result;
}

RerankReport rerank_pipeline(const LinearModel& model, const Dataset& data,
                             const QuantileTable& table, std::size_t k) {
  RerankReport report;
  report.rankings.reserve(data.num_queries());
  for (const RankedQuery& ranked : rank_dataset(model, data)) {
    RerankResult result = fair_rerank(ranked, table);
    report.infeasible_queries += result.infeasible ? 1 : 0;
    report.rankings.push_back(std::move(result.ranking));
  }
  report.record = evaluate_rankings(report.rankings, k);
  return report;
}

}  // namespace fairrank

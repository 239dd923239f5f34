#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fairrank/fair_rerank.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/synthetic.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace fairrank;

namespace {

RankedQuery query_with(std::vector<int> protected_attrs, std::vector<int> relevances = {}) {
  RankedQuery ranked;
  ranked.query_id = "q";
  if (relevances.empty()) relevances.assign(protected_attrs.size(), 0);
  for (std::size_t j = 0; j < protected_attrs.size(); ++j)
    ranked.doc_ids.push_back("d" + std::to_string(j));
  ranked.relevances = std::move(relevances);
  ranked.protected_attrs = std::move(protected_attrs);
  return ranked;
}

}  // namespace

TEST_CASE("binomial cdf on worked values and edge cases") {
  CHECK(binomial_cdf(0, 4, 0.5) == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK(binomial_cdf(1, 4, 0.5) == doctest::Approx(0.3125).epsilon(1e-14));
  CHECK(binomial_cdf(4, 4, 0.5) == 1.0);
  CHECK(binomial_cdf(9, 4, 0.5) == 1.0);  // t past n saturates
  CHECK(binomial_cdf(0, 1, 0.98) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(binomial_cdf(0, 10, 0.0) == 1.0);
  CHECK(binomial_cdf(3, 10, 1.0) == 0.0);
  CHECK(binomial_cdf(10, 10, 1.0) == 1.0);
  CHECK_THROWS_AS(binomial_cdf(0, 4, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(binomial_cdf(0, 4, 1.5), std::invalid_argument);
}

TEST_CASE("binomial cdf is monotone in t and agrees with exact rationals") {
  for (double p : {0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98}) {
    for (std::size_t n : {1, 2, 5, 17, 40, 60}) {
      double prev = 0.0;
      for (std::size_t t = 0; t <= n; ++t) {
        const double got = binomial_cdf(t, n, p);
        const double exact = oracles::binomial_cdf_exact(t, n, p).get_d();
        CHECK(std::fabs(got - exact) < 1e-13);
        CHECK(got >= prev - 1e-15);
        prev = got;
      }
    }
  }
}

TEST_CASE("min_protected table on the worked half-and-half case") {
  // p = 0.5, alpha_q = 0.1: prefix quotas 0,0,0,1,1,1,2,2,3,3.
  const QuantileTable table = min_protected_table(10, 0.5, 0.1);
  CHECK(table.min_protected ==
        std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 2, 2, 3, 3});
  CHECK(table.k_max == 10);

  // Near-degenerate proportions.
  CHECK(min_protected_table(1, 0.98, 0.1).min_protected.front() == 1);
  CHECK(min_protected_table(1, 0.02, 0.1).min_protected.front() == 0);
}

TEST_CASE("min_protected table matches the exact rational oracle") {
  for (double p : {0.02, 0.1, 0.5, 0.9, 0.98})
    for (double alpha_q : {0.05, 0.1, 0.15}) {
      const QuantileTable table = min_protected_table(60, p, alpha_q);
      for (std::size_t i = 1; i <= 60; ++i)
        CHECK(table.min_protected[i - 1] == oracles::min_protected_exact(i, p, alpha_q));
    }
}

TEST_CASE("min_protected quotas grow by at most one and never exceed the prefix") {
  for (double p : {0.3, 0.5, 0.7}) {
    const QuantileTable table = min_protected_table(200, p, 0.1);
    for (std::size_t i = 1; i <= 200; ++i) {
      CHECK(table.min_protected[i - 1] <= i);
      if (i > 1) {
        CHECK(table.min_protected[i - 1] >= table.min_protected[i - 2]);
        CHECK(table.min_protected[i - 1] <= table.min_protected[i - 2] + 1);
      }
    }
  }
}

TEST_CASE("a stricter test level demands at least as many protected items") {
  const QuantileTable lax = min_protected_table(80, 0.5, 0.05);
  const QuantileTable strict = min_protected_table(80, 0.5, 0.2);
  for (std::size_t i = 0; i < 80; ++i)
    CHECK(strict.min_protected[i] >= lax.min_protected[i]);
}

TEST_CASE("min_protected_table validates parameters") {
  CHECK_THROWS_AS(min_protected_table(0, 0.5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(min_protected_table(5, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(min_protected_table(5, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(min_protected_table(5, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(min_protected_table(5, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("fair_rerank pulls a protected item forward exactly when forced") {
  const QuantileTable table = min_protected_table(10, 0.5, 0.1);
  // Quotas for prefixes 1..7 are 0,0,0,1,1,1,2: position 4 forces the first
  // protected item up from rank 6, position 7 consumes the second.
  const RankedQuery ranked = query_with({0, 0, 0, 0, 0, 1, 1});
  const RerankResult result = fair_rerank(ranked, table);
  CHECK_FALSE(result.infeasible);
  CHECK(result.ranking.doc_ids ==
        std::vector<std::string>{"d0", "d1", "d2", "d5", "d3", "d4", "d6"});

  // An input that already satisfies every prefix quota is untouched.
  const RankedQuery fine = query_with({1, 0, 1, 0, 0, 1, 0});
  CHECK(fair_rerank(fine, table).ranking.doc_ids == fine.doc_ids);
}

TEST_CASE("fair_rerank flags infeasible lists but still returns a permutation") {
  const QuantileTable table = min_protected_table(10, 0.5, 0.1);
  const RankedQuery none = query_with({0, 0, 0, 0, 0});
  const RerankResult result = fair_rerank(none, table);
  CHECK(result.infeasible);
  CHECK(result.ranking.doc_ids == none.doc_ids);

  const RankedQuery all = query_with({1, 1, 1, 1, 1});
  const RerankResult unchanged = fair_rerank(all, table);
  CHECK_FALSE(unchanged.infeasible);
  CHECK(unchanged.ranking.doc_ids == all.doc_ids);
}

TEST_CASE("fair_rerank requires a table covering the list") {
  const QuantileTable table = min_protected_table(3, 0.5, 0.1);
  CHECK_THROWS_WITH_AS(fair_rerank(query_with({0, 1, 0, 1}), table),
                       doctest::Contains("covers prefixes up to"), std::invalid_argument);
}

TEST_CASE("fair_rerank properties over random queries") {
  Rng rng(404);
  const double p_grid[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<QuantileTable> tables;
  for (double p : p_grid) tables.push_back(min_protected_table(12, p, 0.1));
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 1 + rng.below(12);
    std::vector<int> protected_attrs(m), relevances(m);
    for (std::size_t j = 0; j < m; ++j) {
      protected_attrs[j] = rng.bernoulli(0.35) ? 1 : 0;
      relevances[j] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const RankedQuery ranked = query_with(protected_attrs, relevances);
    const QuantileTable& table = tables[rng.below(tables.size())];
    const RerankResult result = fair_rerank(ranked, table);

    // Permutation: same docs with their labels attached.
    REQUIRE(result.ranking.size() == m);
    std::map<std::string, std::pair<int, int>> original;
    for (std::size_t j = 0; j < m; ++j)
      original[ranked.doc_ids[j]] = {ranked.relevances[j], ranked.protected_attrs[j]};
    std::map<std::string, std::pair<int, int>> reordered;
    for (std::size_t j = 0; j < m; ++j)
      reordered[result.ranking.doc_ids[j]] = {result.ranking.relevances[j],
                                              result.ranking.protected_attrs[j]};
    CHECK(original == reordered);

    // Stability: original order preserved within each group.
    std::vector<std::size_t> orig_pos;
    for (const std::string& doc : result.ranking.doc_ids)
      orig_pos.push_back(static_cast<std::size_t>(
          std::find(ranked.doc_ids.begin(), ranked.doc_ids.end(), doc) -
          ranked.doc_ids.begin()));
    for (int group : {0, 1}) {
      std::vector<std::size_t> positions;
      for (std::size_t j = 0; j < m; ++j)
        if (result.ranking.protected_attrs[j] == group) positions.push_back(orig_pos[j]);
      CHECK(std::is_sorted(positions.begin(), positions.end()));
    }

    // Feasibility is exactly "enough protected items for the deepest quota".
    const std::size_t total_protected = static_cast<std::size_t>(
        std::count(protected_attrs.begin(), protected_attrs.end(), 1));
    bool enough = true;
    for (std::size_t i = 1; i <= m; ++i)
      if (table.min_protected[i - 1] > total_protected) enough = false;
    CHECK(result.infeasible == !enough);

    // When feasible, every prefix meets its quota.
    if (!result.infeasible) {
      std::size_t placed = 0;
      for (std::size_t i = 1; i <= m; ++i) {
        placed += result.ranking.protected_attrs[i - 1];
        CHECK(placed >= table.min_protected[i - 1]);
      }
    }
  }
}

TEST_CASE("rerank_pipeline re-ranks model output and evaluates the result") {
  SyntheticConfig gen;
  gen.n_queries = 50;
  gen.items_per_query = 8;
  gen.latent_dim = 2;
  gen.protected_rate = 0.3;
  gen.group_bias = 1.0;
  gen.seed = 12;
  const Dataset data = generate_synthetic(gen);
  LinearModel model;
  Rng rng(5);
  for (std::size_t d = 0; d < data.feature_dim; ++d) model.theta.push_back(rng.normal());

  const QuantileTable table = min_protected_table(8, 0.5, 0.1);
  const RerankReport report = rerank_pipeline(model, data, table, 3);
  CHECK(report.rankings.size() == data.num_queries());
  CHECK(report.record.k == 3);
  CHECK(report.record.ndcg >= 0.0);
  CHECK(report.record.ndcg <= 1.0);
  CHECK(report.infeasible_queries <= data.num_queries());

  // The protected share of the pooled top-3 cannot fall when quotas tighten.
  const QuantileTable strict = min_protected_table(8, 0.9, 0.1);
  const RerankReport pushed = rerank_pipeline(model, data, strict, 3);
  auto protected_in_topk = [](const RerankReport& r) {
    std::size_t count = 0;
    for (const RankedQuery& ranked : r.rankings)
      for (std::size_t j = 0; j < std::min<std::size_t>(3, ranked.size()); ++j)
        count += ranked.protected_attrs[j];
    return count;
  };
  CHECK(protected_in_topk(pushed) >= protected_in_topk(report));

  const QuantileTable small = min_protected_table(7, 0.5, 0.1);
  CHECK_THROWS_AS(rerank_pipeline(model, data, small, 3), std::invalid_argument);
}

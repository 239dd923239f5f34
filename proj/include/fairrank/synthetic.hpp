#ifndef FAIRRANK_SYNTHETIC_HPP_
#define FAIRRANK_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>

#include "fairrank/dataset.hpp"

namespace fairrank {

/// Controls the seeded generator for dependent ranking data. Queries are
/// drawn independently; within a query, item slots after the first may copy
/// an earlier item's latent vector and group membership (a near-duplicate),
/// so items within a query are dependent while queries stay independent.
struct SyntheticConfig {
  std::size_t n_queries = 100;
  std::size_t items_per_query = 10;
  std::size_t latent_dim = 4;
  double duplicate_prob = 0.0;   // in [0, 1)
  double protected_rate = 0.5;   // in (0, 1)
  double group_bias = 0.0;       // additive log-odds shift for the protected group
  std::uint64_t seed = 0;
};

void validate_synthetic_config(const SyntheticConfig& config);

/// Feature dimension of generated data: query latent, item latent, and their
/// elementwise product are concatenated.
inline std::size_t synthetic_feature_dim(const SyntheticConfig& config) {
  return 3 * config.latent_dim;
}

/// Deterministic for a fixed config; relevance is Bernoulli under a logistic
/// model on the features, redrawn independently even for duplicated items.
Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace fairrank

#endif  // FAIRRANK_SYNTHETIC_HPP_

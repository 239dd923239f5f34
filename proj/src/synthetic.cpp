#include "fairrank/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fairrank/rng.hpp"

namespace fairrank {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> unit_direction(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(dim);
  double norm2 = 0.0;
  for (double& v : w) {
    v = rng.normal();
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  for (double& v : w) v /= norm;
  return w;
}

}  // namespace

void validate_synthetic_config(const SyntheticConfig& config) {
  if (config.n_queries == 0) throw std::invalid_argument("n_queries must be positive");
  if (config.items_per_query == 0) throw std::invalid_argument("items_per_query must be positive");
  if (config.latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  if (!(config.duplicate_prob >= 0.0 && config.duplicate_prob < 1.0))
    throw std::invalid_argument("duplicate_prob must be in [0, 1)");
  if (!(config.protected_rate > 0.0 && config.protected_rate < 1.0))
    throw std::invalid_argument("protected_rate must be in (0, 1)");
  if (!std::isfinite(config.group_bias)) throw std::invalid_argument("group_bias must be finite");
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  validate_synthetic_config(config);
  const std::size_t dim = config.latent_dim;
  // The latent direction is part of the population, not of the sample: two
  // datasets drawn with different seeds must share it so that resampling
  // estimates the same distribution.
  const std::vector<double> w_star =
      unit_direction(3 * dim, derive_seed(0xA24BAED4963EE407ULL, 3 * dim));

  Dataset data;
  data.feature_dim = 3 * dim;
  data.queries.reserve(config.n_queries);
  for (std::size_t q = 0; q < config.n_queries; ++q) {
    Rng rng(derive_seed(config.seed, 1 + q));
    QueryGroup group;
    group.query_id = "q" + std::to_string(q);
    group.items.reserve(config.items_per_query);

    std::vector<double> query_latent(dim);
    for (double& v : query_latent) v = rng.normal();

    std::vector<std::vector<double>> item_latents(config.items_per_query);
    for (std::size_t j = 0; j < config.items_per_query; ++j) {
      ItemRecord item;
      item.query_id = group.query_id;
      if (j > 0 && rng.bernoulli(config.duplicate_prob)) {
        const std::size_t src = static_cast<std::size_t>(rng.below(j));
        item_latents[j] = item_latents[src];
        item.protected_attr = group.items[src].protected_attr;
        item.doc_id = "d" + std::to_string(src) + "#" + std::to_string(j);
      } else {
        item.protected_attr = rng.bernoulli(config.protected_rate) ? 1 : 0;
        item_latents[j].resize(dim);
        for (double& v : item_latents[j]) v = rng.normal();
        item.doc_id = "d" + std::to_string(j);
      }

      item.features.reserve(3 * dim);
      item.features.insert(item.features.end(), query_latent.begin(), query_latent.end());
      item.features.insert(item.features.end(), item_latents[j].begin(), item_latents[j].end());
      for (std::size_t t = 0; t < dim; ++t)
        item.features.push_back(query_latent[t] * item_latents[j][t]);

      double z = 0.0;
      for (std::size_t t = 0; t < 3 * dim; ++t) z += w_star[t] * item.features[t];
      if (item.protected_attr) z += config.group_bias;
      item.relevance = rng.bernoulli(sigmoid(z)) ? 1 : 0;
      group.items.push_back(std::move(item));
    }
    data.queries.push_back(std::move(group));
  }
  validate_dataset(data);
  return data;
}

}  // namespace fairrank

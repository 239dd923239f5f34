#include "fairrank/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "fairrank/format.hpp"
#include "fairrank/rng.hpp"

namespace fairrank {

namespace {

double log_constant(FairnessKind kind, LogConstantConvention convention) {
  switch (kind) {
    case FairnessKind::eop:
      return convention == LogConstantConvention::appendix ? 24.0 : 48.0;
    case FairnessKind::dp:
      return 24.0;
    case FairnessKind::eod:
      return 48.0;
  }
  throw std::invalid_argument("bad fairness kind");
}

void check_bound_inputs(const BoundInputs& inputs, double mass, const char* mass_name) {
  if (inputs.n_queries == 0 || inputs.items_per_query == 0)
    throw std::invalid_argument("complexity_term: need positive query and item counts");
  if (inputs.vc_dim == 0) throw std::invalid_argument("complexity_term: vc_dim must be positive");
  if (2 * inputs.n_queries * inputs.items_per_query <= inputs.vc_dim)
    throw std::invalid_argument("complexity_term: requires 2*N*m > vc_dim");
  if (!(inputs.delta > 0.0 && inputs.delta < 1.0))
    throw std::invalid_argument("complexity_term: delta must be in (0, 1)");
  if (!(mass > 0.0 && mass <= 1.0))
    throw std::invalid_argument(std::string("complexity_term: ") + mass_name +
                                " must be in (0, 1]");
}

struct TableStats {
  double p_min = 0.0;  // smallest (group, relevance) cell mass
  double q_min = 0.0;  // smallest group mass
};

TableStats table_masses(const ItemValueTable& table) {
  std::size_t cell[2][2] = {{0, 0}, {0, 0}};
  for (const ValueRow& row : table.rows) cell[row.protected_attr][row.relevance] += 1;
  const double total = static_cast<double>(table.rows.size());
  TableStats stats;
  stats.p_min = 1.0;
  for (int a = 0; a < 2; ++a)
    for (int r = 0; r < 2; ++r)
      stats.p_min = std::min(stats.p_min, static_cast<double>(cell[a][r]) / total);
  stats.q_min = std::min(static_cast<double>(cell[0][0] + cell[0][1]) / total,
                         static_cast<double>(cell[1][0] + cell[1][1]) / total);
  return stats;
}

ItemValueTable selector_table(const Dataset& data,
                              const std::function<int(const ItemRecord&)>& selector) {
  ItemValueTable table;
  table.rows.reserve(data.total_items());
  for (const QueryGroup& group : data.queries)
    for (const ItemRecord& item : group.items) {
      const int chosen = selector(item);
      if (chosen != 0 && chosen != 1)
        throw std::invalid_argument("gap_experiment: selector must return 0 or 1");
      table.rows.push_back(ValueRow{item.protected_attr, item.relevance,
                                    static_cast<double>(chosen)});
    }
  return table;
}

double empirical_upper_quantile(std::vector<double> values, double delta) {
  std::sort(values.begin(), values.end());
  const double level = (1.0 - delta) * static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(level));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

}  // namespace

double complexity_term(const BoundInputs& inputs, FairnessKind kind,
                       LogConstantConvention convention) {
  const bool uses_group_mass = kind == FairnessKind::dp;
  const double mass = uses_group_mass ? inputs.q_min : inputs.p_min;
  check_bound_inputs(inputs, mass, uses_group_mass ? "q_min" : "p_min");
  const double n = static_cast<double>(inputs.n_queries);
  const double nm = n * static_cast<double>(inputs.items_per_query);
  const double v = static_cast<double>(inputs.vc_dim);
  const double growth = v * std::log(2.0 * std::numbers::e * nm / v);
  const double confidence = std::log(log_constant(kind, convention) / inputs.delta);
  return 8.0 * std::sqrt(2.0 * (growth + confidence) / (n * mass * mass));
}

double complexity_eop(const BoundInputs& inputs, LogConstantConvention convention) {
  return complexity_term(inputs, FairnessKind::eop, convention);
}

double complexity_eod(const BoundInputs& inputs) {
  return complexity_term(inputs, FairnessKind::eod);
}

double complexity_dp(const BoundInputs& inputs) {
  return complexity_term(inputs, FairnessKind::dp);
}

double janson_sum_bound(double t, std::size_t chi, const std::vector<double>& spans) {
  if (!(t >= 0.0)) throw std::invalid_argument("janson_sum_bound: t must be non-negative");
  if (chi == 0) throw std::invalid_argument("janson_sum_bound: chi must be positive");
  if (spans.empty()) throw std::invalid_argument("janson_sum_bound: need at least one span");
  double span_sq = 0.0;
  for (double s : spans) {
    if (!(s > 0.0)) throw std::invalid_argument("janson_sum_bound: spans must be positive");
    span_sq += s * s;
  }
  return std::exp(-2.0 * t * t / (static_cast<double>(chi) * span_sq));
}

double janson_mean_bound(double t, std::size_t n_vars, std::size_t chi) {
  if (!(t >= 0.0)) throw std::invalid_argument("janson_mean_bound: t must be non-negative");
  if (n_vars == 0) throw std::invalid_argument("janson_mean_bound: need at least one variable");
  if (chi == 0) throw std::invalid_argument("janson_mean_bound: chi must be positive");
  return std::exp(-2.0 * t * t * static_cast<double>(n_vars) / static_cast<double>(chi));
}

std::function<int(const ItemRecord&)> threshold_selector(std::size_t feature_index,
                                                         double threshold) {
  return [feature_index, threshold](const ItemRecord& item) {
    if (feature_index >= item.features.size())
      throw std::invalid_argument("threshold_selector: feature index out of range");
    return item.features[feature_index] > threshold ? 1 : 0;
  };
}

GapExperimentReport gap_experiment(const GapExperimentConfig& config) {
  if (!config.selector) throw std::invalid_argument("gap_experiment: selector is required");
  if (config.trials == 0) throw std::invalid_argument("gap_experiment: trials must be positive");
  if (!(config.delta > 0.0 && config.delta < 1.0))
    throw std::invalid_argument("gap_experiment: delta must be in (0, 1)");
  validate_synthetic_config(config.generator);
  if (config.reference_items < config.generator.items_per_query)
    throw std::invalid_argument("gap_experiment: reference_items too small");

  GapExperimentReport report;
  report.kind = config.kind;
  report.delta = config.delta;

  SyntheticConfig reference_cfg = config.generator;
  reference_cfg.n_queries = (config.reference_items + config.generator.items_per_query - 1) /
                            config.generator.items_per_query;
  reference_cfg.seed = derive_seed(config.generator.seed, 0x8000000000000001ULL);
  const ItemValueTable reference = selector_table(generate_synthetic(reference_cfg),
                                                  config.selector);
  if (!has_required_subgroups(reference, config.kind))
    throw std::runtime_error("gap_experiment: the population sample is missing a subgroup");
  report.gamma_population = empirical_fairness(reference, config.kind);
  const TableStats masses = table_masses(reference);
  report.p_hat = masses.p_min;
  report.q_hat = masses.q_min;

  SyntheticConfig trial_cfg = config.generator;
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    trial_cfg.seed = derive_seed(config.generator.seed, trial);
    const ItemValueTable table = selector_table(generate_synthetic(trial_cfg), config.selector);
    if (!has_required_subgroups(table, config.kind)) {
      report.degenerate_trials += 1;
      continue;
    }
    const double gamma = empirical_fairness(table, config.kind);
    report.trial_ids.push_back(trial);
    report.trial_gammas.push_back(gamma);
    report.gaps.push_back(report.gamma_population - gamma);
  }
  if (report.gaps.empty())
    throw std::runtime_error("gap_experiment: every trial was missing a subgroup");

  report.gap_quantile = empirical_upper_quantile(report.gaps, config.delta);
  BoundInputs inputs;
  inputs.n_queries = config.generator.n_queries;
  inputs.items_per_query = config.generator.items_per_query;
  inputs.vc_dim = config.vc_dim;
  inputs.p_min = report.p_hat;
  inputs.q_min = report.q_hat;
  inputs.delta = config.delta;
  report.bound_value = complexity_term(inputs, config.kind, config.convention);
  return report;
}

void save_gap_report(const GapExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# kind=" << fairness_kind_name(report.kind) << " delta=" << format_double(report.delta)
      << " degenerate_trials=" << report.degenerate_trials << '\n';
  out << "# gamma_population=" << format_double(report.gamma_population)
      << " p_hat=" << format_double(report.p_hat) << " q_hat=" << format_double(report.q_hat)
      << " gap_quantile=" << format_double(report.gap_quantile)
      << " bound=" << format_double(report.bound_value) << '\n';
  out << "trial,gamma_empirical,gap\n";
  for (std::size_t i = 0; i < report.gaps.size(); ++i)
    out << report.trial_ids[i] << ',' << format_double(report.trial_gammas[i]) << ','
        << format_double(report.gaps[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fairrank

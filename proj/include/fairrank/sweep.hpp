#ifndef FAIRRANK_SWEEP_HPP_
#define FAIRRANK_SWEEP_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairrank/dataset.hpp"
#include "fairrank/metrics.hpp"
#include "fairrank/training.hpp"

namespace fairrank {

enum class EvalMode { folds, seeds };
enum class StandardizeMode { off, train, global };
enum class AdmissibleScope { per_k, pooled };

struct SweepConfig {
  std::string data_path;
  std::vector<double> alphas;  // must contain 0 (the unregularized baseline)
  FairnessKind kind = FairnessKind::eop;
  FairnessScope scope = FairnessScope::amortized;
  EvalMode eval_mode = EvalMode::folds;
  std::size_t k_folds = 5;
  std::size_t n_seeds = 10;
  std::vector<std::size_t> k_list = {10};
  OptimizerKind optimizer = OptimizerKind::gd;
  double learning_rate = 0.003;
  std::size_t steps = 1500;
  std::size_t epochs = 5;
  std::size_t batch_queries = 100;
  std::size_t batch_docs = 10;
  std::uint64_t seed = 0;
  std::string out_dir;
  StandardizeMode standardize = StandardizeMode::train;
  AdmissibleScope admissible_scope = AdmissibleScope::per_k;
};

void validate_sweep_config(const SweepConfig& config);

/// Flat key=value file, '#' comments. Unknown keys are an error.
SweepConfig parse_sweep_config_file(const std::string& path);

struct RunRecord {
  double alpha;
  std::size_t run;
  std::size_t k;
  double ndcg;
  double precision;
  double gamma;
};

struct SweepRow {
  double alpha;
  std::size_t k;
  double quality_mean;   // ndcg
  double quality_disp;   // standard error (folds) or standard deviation (seeds)
  double gamma_mean;
  double gamma_disp;
  std::size_t n_runs;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  EvalMode eval_mode = EvalMode::folds;
};

struct SweepResult {
  SweepTable table;
  std::vector<RunRecord> runs;
};

/// Trains one model per (alpha, fold-or-seed) with paired splits, evaluates
/// on the held-out queries, and aggregates per (alpha, k).
SweepResult run_sweep(const Dataset& data, const SweepConfig& config);

/// Alphas whose mean quality at cutoff k is not significantly below the
/// alpha=0 baseline: quality(alpha) >= quality(0) - (disp(alpha) + disp(0)).
/// Returned sorted ascending; always contains 0.
std::vector<double> significance_filter(const SweepTable& table, std::size_t k);

/// Same rule applied to quality averaged over all cutoffs in the table.
std::vector<double> significance_filter_pooled(const SweepTable& table);

/// Relative fairness reduction (gamma(0) - gamma(alpha)) / gamma(0) over the
/// admissible alphas (the baseline itself contributes 0). A zero baseline
/// yields 0 when gamma(alpha) is also 0 and NaN (reported as n/a) otherwise.
struct SummaryRecord {
  double max_rel_reduction = 0.0;
  double mean_rel_reduction = 0.0;
  std::vector<double> admissible_alphas;
};

SummaryRecord summarize(const SweepTable& table, std::size_t k);
SummaryRecord summarize_with(const SweepTable& table, std::size_t k,
                             const std::vector<double>& admissible);

struct SummaryRow {
  std::string k_label;  // cutoff value or "avg"
  SummaryRecord record;
};

std::vector<SummaryRow> summarize_all(const SweepTable& table, const SweepConfig& config);

/// Writes sweep.csv, runs.csv, summary.csv and one plotdata_k<K>.csv per
/// cutoff into out_dir (created if needed).
void emit_outputs(const SweepResult& result, const std::vector<SummaryRow>& summaries,
                  const SweepConfig& config);

/// Load, sweep, summarize, emit; returns the summaries for display.
std::vector<SummaryRow> execute_sweep(const SweepConfig& config);

}  // namespace fairrank

#endif  // FAIRRANK_SWEEP_HPP_

#ifndef FAIRRANK_TRAINING_HPP_
#define FAIRRANK_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairrank/dataset.hpp"
#include "fairrank/metrics.hpp"

namespace fairrank {

struct LinearModel {
  std::vector<double> theta;
};

double score(const LinearModel& model, const ItemRecord& item);
std::vector<double> score_query(const LinearModel& model, const QueryGroup& group);
std::vector<RankedQuery> rank_dataset(const LinearModel& model, const Dataset& data);

enum class FairnessScope { amortized, per_query };
enum class OptimizerKind { gd, sgd };

FairnessScope parse_fairness_scope(std::string_view name);
std::string_view fairness_scope_name(FairnessScope scope);

struct TrainConfig {
  double alpha = 0.0;
  FairnessKind kind = FairnessKind::eop;
  FairnessScope scope = FairnessScope::amortized;
  OptimizerKind optimizer = OptimizerKind::gd;
  double learning_rate = 0.003;
  std::size_t steps = 1500;             // gd only
  std::size_t epochs = 5;               // sgd only
  std::size_t queries_per_batch = 100;  // sgd only
  std::size_t docs_per_query_cap = 10;  // sgd only
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

/// A minibatch: query indices into the dataset plus the item indices kept
/// for each query. Batches are always processed in ascending query order so
/// one full-batch SGD step reproduces a GD step exactly.
struct BatchQuery {
  std::size_t query_index;
  std::vector<std::size_t> item_indices;
};
using Batch = std::vector<BatchQuery>;

Batch full_batch(const Dataset& data);

struct RegularizerStats {
  std::size_t missing_cell_events = 0;
};

double squared_loss(const LinearModel& model, const Dataset& data, const Batch& batch);
double squared_loss(const LinearModel& model, const Dataset& data);

/// Fairness penalty of the raw scores over the batch. Comparisons whose
/// subgroups are absent from the batch contribute zero and are counted in
/// `stats` instead of raising, since small minibatches routinely miss a
/// subgroup. With per-query scope the penalty is averaged over the queries
/// that have at least one evaluable comparison.
double regularizer(const LinearModel& model, const Dataset& data, const Batch& batch,
                   FairnessKind kind, FairnessScope scope, RegularizerStats* stats = nullptr);
double regularizer(const LinearModel& model, const Dataset& data, FairnessKind kind,
                   FairnessScope scope, RegularizerStats* stats = nullptr);

double objective(const LinearModel& model, const Dataset& data, const Batch& batch,
                 const TrainConfig& config, RegularizerStats* stats = nullptr);

/// Analytic subgradient of the objective; the penalty term uses
/// sign(gap) * (difference of subgroup feature means), with sign(0) = 0.
std::vector<double> gradient(const LinearModel& model, const Dataset& data, const Batch& batch,
                             const TrainConfig& config, RegularizerStats* stats = nullptr);

struct TraceRow {
  std::size_t step;
  double loss;
  double gamma;
  double objective;
};

struct TrainTrace {
  std::vector<TraceRow> rows;  // values at the weights each step starts from
  std::vector<std::vector<std::size_t>> epoch_query_order;  // sgd shuffles
  std::size_t missing_cell_warnings = 0;
};

struct TrainResult {
  LinearModel model;
  TrainTrace trace;
};

TrainResult train_gd(const Dataset& data, const TrainConfig& config);
TrainResult train_sgd(const Dataset& data, const TrainConfig& config);
TrainResult train(const Dataset& data, const TrainConfig& config);

void save_model(const LinearModel& model, const std::string& path);
LinearModel load_model(const std::string& path);
void save_trace(const TrainTrace& trace, const std::string& path);

}  // namespace fairrank

#endif  // FAIRRANK_TRAINING_HPP_

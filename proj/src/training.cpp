#include "fairrank/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fairrank/format.hpp"
#include "fairrank/rng.hpp"

namespace fairrank {

namespace {

struct CellAcc {
  std::size_t count = 0;
  double score_sum = 0.0;
  std::vector<double> feature_sum;

  void add(double s, const std::vector<double>& features) {
    count += 1;
    score_sum += s;
    if (feature_sum.empty()) feature_sum.assign(features.size(), 0.0);
    for (std::size_t d = 0; d < features.size(); ++d) feature_sum[d] += features[d];
  }
};

// cell[a][r] feeds eop/eod; group[a] is accumulated directly in item order
// so the dp gap matches a plain one-pass group mean bit for bit.
struct PenaltyAcc {
  CellAcc cell[2][2];
  CellAcc group[2];

  void add(const ItemRecord& item, double s) {
    cell[item.protected_attr][item.relevance].add(s, item.features);
    group[item.protected_attr].add(s, item.features);
  }
};

struct Comparison {
  double weight;
  const CellAcc* lhs;
  const CellAcc* rhs;
};

std::vector<Comparison> comparisons_for(const PenaltyAcc& acc, FairnessKind kind) {
  switch (kind) {
    case FairnessKind::eop:
      return {{1.0, &acc.cell[0][1], &acc.cell[1][1]}};
    case FairnessKind::dp:
      return {{1.0, &acc.group[0], &acc.group[1]}};
    case FairnessKind::eod:
      return {{0.5, &acc.cell[0][0], &acc.cell[1][0]}, {0.5, &acc.cell[0][1], &acc.cell[1][1]}};
  }
  throw std::invalid_argument("bad fairness kind");
}

// Evaluates the penalty of one accumulator. Returns the number of
// comparisons whose subgroups were all present; absent ones add zero.
std::size_t penalty_of(const PenaltyAcc& acc, FairnessKind kind, double& value,
                       std::vector<double>* grad, RegularizerStats* stats) {
  std::size_t evaluated = 0;
  for (const Comparison& cmp : comparisons_for(acc, kind)) {
    if (cmp.lhs->count == 0 || cmp.rhs->count == 0) {
      if (stats) stats->missing_cell_events += 1;
      continue;
    }
    const double gap = cmp.lhs->score_sum / static_cast<double>(cmp.lhs->count) -
                       cmp.rhs->score_sum / static_cast<double>(cmp.rhs->count);
    value += cmp.weight * std::abs(gap);
    if (grad && gap != 0.0) {
      const double coef = gap > 0.0 ? cmp.weight : -cmp.weight;
      for (std::size_t d = 0; d < grad->size(); ++d)
        (*grad)[d] += coef * (cmp.lhs->feature_sum[d] / static_cast<double>(cmp.lhs->count) -
                              cmp.rhs->feature_sum[d] / static_cast<double>(cmp.rhs->count));
    }
    evaluated += 1;
  }
  return evaluated;
}

struct Evaluation {
  double loss = 0.0;
  double gamma = 0.0;
  double objective = 0.0;
  std::vector<double> grad;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
  return s;
}

Evaluation evaluate(const LinearModel& model, const Dataset& data, const Batch& batch,
                    double alpha, FairnessKind kind, FairnessScope scope, bool want_grad,
                    RegularizerStats* stats) {
  const std::size_t dim = data.feature_dim;
  if (model.theta.size() != dim)
    throw std::invalid_argument("model dimension " + std::to_string(model.theta.size()) +
                                " does not match data dimension " + std::to_string(dim));
  std::size_t n_items = 0;
  for (const BatchQuery& bq : batch) n_items += bq.item_indices.size();
  if (n_items == 0) throw std::invalid_argument("empty batch");

  Evaluation out;
  std::vector<double> loss_grad;
  std::vector<double> penalty_grad;
  if (want_grad) {
    loss_grad.assign(dim, 0.0);
    penalty_grad.assign(dim, 0.0);
  }

  double loss_sum = 0.0;
  PenaltyAcc pooled;
  double per_query_sum = 0.0;
  std::vector<double> per_query_grad;
  if (want_grad && scope == FairnessScope::per_query) per_query_grad.assign(dim, 0.0);
  std::size_t evaluable_queries = 0;

  for (const BatchQuery& bq : batch) {
    const QueryGroup& group = data.queries.at(bq.query_index);
    PenaltyAcc local;
    PenaltyAcc& acc = scope == FairnessScope::per_query ? local : pooled;
    for (std::size_t idx : bq.item_indices) {
      const ItemRecord& item = group.items.at(idx);
      const double s = dot(model.theta, item.features);
      const double residual = s - static_cast<double>(item.relevance);
      loss_sum += residual * residual;
      if (want_grad)
        for (std::size_t d = 0; d < dim; ++d) loss_grad[d] += residual * item.features[d];
      acc.add(item, s);
    }
    if (scope == FairnessScope::per_query) {
      double value = 0.0;
      std::vector<double> qgrad;
      if (want_grad) qgrad.assign(dim, 0.0);
      const std::size_t evaluated =
          penalty_of(local, kind, value, want_grad ? &qgrad : nullptr, stats);
      if (evaluated > 0) {
        evaluable_queries += 1;
        per_query_sum += value;
        if (want_grad)
          for (std::size_t d = 0; d < dim; ++d) per_query_grad[d] += qgrad[d];
      }
    }
  }

  if (scope == FairnessScope::amortized) {
    penalty_of(pooled, kind, out.gamma, want_grad ? &penalty_grad : nullptr, stats);
  } else if (evaluable_queries > 0) {
    out.gamma = per_query_sum / static_cast<double>(evaluable_queries);
    if (want_grad)
      for (std::size_t d = 0; d < dim; ++d)
        penalty_grad[d] = per_query_grad[d] / static_cast<double>(evaluable_queries);
  }

  out.loss = loss_sum / static_cast<double>(n_items);
  out.objective = out.loss + alpha * out.gamma;
  if (want_grad) {
    out.grad.assign(dim, 0.0);
    const double scale = 2.0 / static_cast<double>(n_items);
    for (std::size_t d = 0; d < dim; ++d)
      out.grad[d] = scale * loss_grad[d] + alpha * penalty_grad[d];
  }
  return out;
}

std::vector<std::size_t> subsample_items(Rng& rng, std::size_t n_items, std::size_t cap) {
  std::vector<std::size_t> idx(n_items);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n_items <= cap) return idx;
  for (std::size_t t = 0; t < cap; ++t) {
    const std::size_t j = t + static_cast<std::size_t>(rng.below(n_items - t));
    std::swap(idx[t], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void check_trainable(const Dataset& data) {
  if (data.num_queries() == 0) throw std::invalid_argument("cannot train on an empty dataset");
  if (data.feature_dim == 0) throw std::invalid_argument("cannot train with zero features");
}

void descend(LinearModel& model, const std::vector<double>& grad, double learning_rate) {
  for (std::size_t d = 0; d < model.theta.size(); ++d)
    model.theta[d] -= learning_rate * grad[d];
}

void check_step_finite(double objective_value, std::size_t step) {
  if (!std::isfinite(objective_value))
    throw std::runtime_error("objective became non-finite at step " + std::to_string(step) +
                             "; lower the learning rate");
}

void check_final_finite(const LinearModel& model) {
  for (double w : model.theta)
    if (!std::isfinite(w))
      throw std::runtime_error("weights became non-finite; lower the learning rate");
}

}  // namespace

double score(const LinearModel& model, const ItemRecord& item) {
  if (model.theta.size() != item.features.size())
    throw std::invalid_argument("score: model dimension does not match item features");
  return dot(model.theta, item.features);
}

std::vector<double> score_query(const LinearModel& model, const QueryGroup& group) {
  std::vector<double> scores;
  scores.reserve(group.items.size());
  for (const ItemRecord& item : group.items) scores.push_back(score(model, item));
  return scores;
}

std::vector<RankedQuery> rank_dataset(const LinearModel& model, const Dataset& data) {
  std::vector<RankedQuery> rankings;
  rankings.reserve(data.num_queries());
  for (const QueryGroup& group : data.queries)
    rankings.push_back(rank_by_score(group, score_query(model, group)));
  return rankings;
}

FairnessScope parse_fairness_scope(std::string_view name) {
  if (name == "amortized") return FairnessScope::amortized;
  if (name == "per-query" || name == "per_query") return FairnessScope::per_query;
  throw std::invalid_argument("unknown fairness scope '" + std::string(name) +
                              "' (expected amortized or per-query)");
}

std::string_view fairness_scope_name(FairnessScope scope) {
  return scope == FairnessScope::amortized ? "amortized" : "per-query";
}

void validate_train_config(const TrainConfig& config) {
  if (!(config.alpha >= 0.0) || !std::isfinite(config.alpha))
    throw std::invalid_argument("alpha must be finite and non-negative");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
    throw std::invalid_argument("learning_rate must be finite and positive");
  if (config.optimizer == OptimizerKind::gd) {
    if (config.steps == 0) throw std::invalid_argument("steps must be positive");
  } else {
    if (config.epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (config.queries_per_batch == 0)
      throw std::invalid_argument("queries_per_batch must be positive");
    if (config.docs_per_query_cap == 0)
      throw std::invalid_argument("docs_per_query_cap must be positive");
  }
}

Batch full_batch(const Dataset& data) {
  Batch batch;
  batch.reserve(data.num_queries());
  for (std::size_t q = 0; q < data.num_queries(); ++q) {
    BatchQuery bq;
    bq.query_index = q;
    bq.item_indices.resize(data.queries[q].items.size());
    std::iota(bq.item_indices.begin(), bq.item_indices.end(), std::size_t{0});
    batch.push_back(std::move(bq));
  }
  return batch;
}

double squared_loss(const LinearModel& model, const Dataset& data, const Batch& batch) {
  return evaluate(model, data, batch, 0.0, FairnessKind::eop, FairnessScope::amortized, false,
                  nullptr)
      .loss;
}

double squared_loss(const LinearModel& model, const Dataset& data) {
  return squared_loss(model, data, full_batch(data));
}

double regularizer(const LinearModel& model, const Dataset& data, const Batch& batch,
                   FairnessKind kind, FairnessScope scope, RegularizerStats* stats) {
  return evaluate(model, data, batch, 0.0, kind, scope, false, stats).gamma;
}

double regularizer(const LinearModel& model, const Dataset& data, FairnessKind kind,
                   FairnessScope scope, RegularizerStats* stats) {
  return regularizer(model, data, full_batch(data), kind, scope, stats);
}

double objective(const LinearModel& model, const Dataset& data, const Batch& batch,
                 const TrainConfig& config, RegularizerStats* stats) {
  return evaluate(model, data, batch, config.alpha, config.kind, config.scope, false, stats)
      .objective;
}

std::vector<double> gradient(const LinearModel& model, const Dataset& data, const Batch& batch,
                             const TrainConfig& config, RegularizerStats* stats) {
  return evaluate(model, data, batch, config.alpha, config.kind, config.scope, true, stats).grad;
}

TrainResult train_gd(const Dataset& data, const TrainConfig& config) {
  validate_train_config(config);
  check_trainable(data);
  TrainResult result;
  result.model.theta.assign(data.feature_dim, 0.0);
  const Batch batch = full_batch(data);
  RegularizerStats stats;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    Evaluation eval =
        evaluate(result.model, data, batch, config.alpha, config.kind, config.scope, true, &stats);
    check_step_finite(eval.objective, step);
    result.trace.rows.push_back(TraceRow{step, eval.loss, eval.gamma, eval.objective});
    descend(result.model, eval.grad, config.learning_rate);
  }
  check_final_finite(result.model);
  result.trace.missing_cell_warnings = stats.missing_cell_events;
  return result;
}

TrainResult train_sgd(const Dataset& data, const TrainConfig& config) {
  validate_train_config(config);
  check_trainable(data);
  TrainResult result;
  result.model.theta.assign(data.feature_dim, 0.0);
  RegularizerStats stats;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    std::vector<std::size_t> order(data.num_queries());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    result.trace.epoch_query_order.push_back(order);
    for (std::size_t pos = 0; pos < order.size(); pos += config.queries_per_batch) {
      const std::size_t end = std::min(order.size(), pos + config.queries_per_batch);
      Batch batch;
      batch.reserve(end - pos);
      for (std::size_t i = pos; i < end; ++i) {
        BatchQuery bq;
        bq.query_index = order[i];
        bq.item_indices = subsample_items(rng, data.queries[order[i]].items.size(),
                                          config.docs_per_query_cap);
        batch.push_back(std::move(bq));
      }
      std::sort(batch.begin(), batch.end(),
                [](const BatchQuery& a, const BatchQuery& b) { return a.query_index < b.query_index; });
      ++step;
      Evaluation eval = evaluate(result.model, data, batch, config.alpha, config.kind,
                                 config.scope, true, &stats);
      check_step_finite(eval.objective, step);
      result.trace.rows.push_back(TraceRow{step, eval.loss, eval.gamma, eval.objective});
      descend(result.model, eval.grad, config.learning_rate);
    }
  }
  check_final_finite(result.model);
  result.trace.missing_cell_warnings = stats.missing_cell_events;
  return result;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  return config.optimizer == OptimizerKind::gd ? train_gd(data, config) : train_sgd(data, config);
}

void save_model(const LinearModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "linear-model 1 " << model.theta.size() << '\n';
  for (double w : model.theta) out << format_double(w) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

LinearModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int version = 0;
  std::size_t dim = 0;
  if (!(in >> magic >> version >> dim) || magic != "linear-model" || version != 1)
    throw std::invalid_argument(path + ": not a linear-model file");
  LinearModel model;
  model.theta.reserve(dim);
  std::string token;
  for (std::size_t d = 0; d < dim; ++d) {
    if (!(in >> token)) throw std::invalid_argument(path + ": truncated weight list");
    model.theta.push_back(parse_double(token, path));
  }
  if (in >> token) throw std::invalid_argument(path + ": trailing content");
  return model;
}

void save_trace(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,loss,gamma,objective\n";
  for (const TraceRow& row : trace.rows)
    out << row.step << ',' << format_double(row.loss) << ',' << format_double(row.gamma) << ','
        << format_double(row.objective) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fairrank

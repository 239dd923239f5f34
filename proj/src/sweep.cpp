#include "fairrank/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fairrank/format.hpp"
#include "fairrank/rng.hpp"

namespace fairrank {

namespace {

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "folds") return EvalMode::folds;
  if (name == "seeds") return EvalMode::seeds;
  throw std::invalid_argument("unknown eval_mode '" + std::string(name) +
                              "' (expected folds or seeds)");
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "gd") return OptimizerKind::gd;
  if (name == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected gd or sgd)");
}

StandardizeMode parse_standardize_mode(std::string_view name) {
  if (name == "off") return StandardizeMode::off;
  if (name == "train") return StandardizeMode::train;
  if (name == "global") return StandardizeMode::global;
  throw std::invalid_argument("unknown standardize mode '" + std::string(name) +
                              "' (expected off, train, or global)");
}

AdmissibleScope parse_admissible_scope(std::string_view name) {
  if (name == "per_k" || name == "per-k") return AdmissibleScope::per_k;
  if (name == "pooled") return AdmissibleScope::pooled;
  throw std::invalid_argument("unknown admissible_scope '" + std::string(name) +
                              "' (expected per_k or pooled)");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find(',', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view item = strip(text.substr(start, pos - start));
    if (!item.empty()) out.emplace_back(item);
    start = pos + 1;
  }
  return out;
}

const SweepRow& row_at(const SweepTable& table, double alpha, std::size_t k) {
  for (const SweepRow& row : table.rows)
    if (row.alpha == alpha && row.k == k) return row;
  throw std::invalid_argument("no sweep row for alpha=" + format_double(alpha) +
                              ", k=" + std::to_string(k));
}

double sample_mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_stddev(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

struct ReductionStats {
  double max = 0.0;
  double mean = 0.0;
};

ReductionStats reduce_stats(const std::vector<double>& reductions) {
  ReductionStats stats;
  bool any_nan = false;
  double best = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double r : reductions) {
    if (std::isnan(r)) {
      any_nan = true;
      continue;
    }
    best = std::max(best, r);
    sum += r;
  }
  if (any_nan) {
    stats.max = std::numeric_limits<double>::quiet_NaN();
    stats.mean = std::numeric_limits<double>::quiet_NaN();
  } else {
    stats.max = best;
    stats.mean = sum / static_cast<double>(reductions.size());
  }
  return stats;
}

std::string na_or(double v) { return std::isnan(v) ? "n/a" : format_sig9(v); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void validate_sweep_config(const SweepConfig& config) {
  if (config.alphas.empty()) throw std::invalid_argument("sweep: alphas must not be empty");
  std::set<double> seen;
  bool has_zero = false;
  for (double a : config.alphas) {
    if (!(a >= 0.0) || !std::isfinite(a))
      throw std::invalid_argument("sweep: alphas must be finite and non-negative");
    if (!seen.insert(a).second) throw std::invalid_argument("sweep: duplicate alpha value");
    if (a == 0.0) has_zero = true;
  }
  if (!has_zero) throw std::invalid_argument("sweep: alphas must include 0 as the baseline");
  if (config.k_list.empty()) throw std::invalid_argument("sweep: k_list must not be empty");
  std::set<std::size_t> seen_k;
  for (std::size_t k : config.k_list) {
    if (k == 0) throw std::invalid_argument("sweep: cutoffs must be positive");
    if (!seen_k.insert(k).second) throw std::invalid_argument("sweep: duplicate cutoff");
  }
  if (config.eval_mode == EvalMode::folds && config.k_folds < 2)
    throw std::invalid_argument("sweep: k_folds must be at least 2");
  if (config.eval_mode == EvalMode::seeds && config.n_seeds == 0)
    throw std::invalid_argument("sweep: n_seeds must be positive");
  TrainConfig probe;
  probe.alpha = 0.0;
  probe.kind = config.kind;
  probe.scope = config.scope;
  probe.optimizer = config.optimizer;
  probe.learning_rate = config.learning_rate;
  probe.steps = config.steps;
  probe.epochs = config.epochs;
  probe.queries_per_batch = config.batch_queries;
  probe.docs_per_query_cap = config.batch_docs;
  validate_train_config(probe);
}

SweepConfig parse_sweep_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SweepConfig config;
  bool saw_data = false, saw_alphas = false, saw_out = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip(line);
    if (view.empty() || view.front() == '#') continue;
    const std::size_t eq = view.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected key=value");
    const std::string key(strip(view.substr(0, eq)));
    const std::string value(strip(view.substr(eq + 1)));
    const std::string where = path + ":" + std::to_string(line_no);
    if (value.empty()) throw std::invalid_argument(where + ": empty value for '" + key + "'");
    if (key == "data") {
      config.data_path = value;
      saw_data = true;
    } else if (key == "alphas") {
      config.alphas.clear();
      for (const std::string& a : split_list(value))
        config.alphas.push_back(parse_double(a, where));
      saw_alphas = true;
    } else if (key == "fairness") {
      config.kind = parse_fairness_kind(value);
    } else if (key == "scope") {
      config.scope = parse_fairness_scope(value);
    } else if (key == "eval_mode") {
      config.eval_mode = parse_eval_mode(value);
    } else if (key == "k_folds") {
      config.k_folds = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "n_seeds") {
      config.n_seeds = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "k_list") {
      config.k_list.clear();
      for (const std::string& k : split_list(value))
        config.k_list.push_back(static_cast<std::size_t>(parse_int(k, where)));
    } else if (key == "optimizer") {
      config.optimizer = parse_optimizer(value);
    } else if (key == "lr") {
      config.learning_rate = parse_double(value, where);
    } else if (key == "steps") {
      config.steps = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "epochs") {
      config.epochs = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "batch_queries") {
      config.batch_queries = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "batch_docs") {
      config.batch_docs = static_cast<std::size_t>(parse_int(value, where));
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(value, where));
    } else if (key == "out_dir") {
      config.out_dir = value;
      saw_out = true;
    } else if (key == "standardize") {
      config.standardize = parse_standardize_mode(value);
    } else if (key == "admissible_scope") {
      config.admissible_scope = parse_admissible_scope(value);
    } else {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
  if (!saw_data) throw std::invalid_argument(path + ": missing required key 'data'");
  if (!saw_alphas) throw std::invalid_argument(path + ": missing required key 'alphas'");
  if (!saw_out) throw std::invalid_argument(path + ": missing required key 'out_dir'");
  validate_sweep_config(config);
  return config;
}

SweepResult run_sweep(const Dataset& data, const SweepConfig& config) {
  validate_sweep_config(config);
  Dataset base = data;
  if (config.standardize == StandardizeMode::global) base = standardize(data).first;

  // Splits are built once and shared by every alpha, so the comparison
  // against the alpha=0 baseline is paired.
  std::vector<FoldSplit> splits;
  if (config.eval_mode == EvalMode::folds) {
    splits = split_folds(base, config.k_folds, config.seed);
  } else {
    for (std::size_t run = 0; run < config.n_seeds; ++run)
      splits.push_back(holdout_split(base, 0.2, derive_seed(config.seed, 2 * run)));
  }

  SweepResult result;
  result.table.eval_mode = config.eval_mode;
  for (double alpha : config.alphas) {
    for (std::size_t run = 0; run < splits.size(); ++run) {
      try {
        Dataset train_data = splits[run].train;
        Dataset test_data = splits[run].test;
        if (config.standardize == StandardizeMode::train) {
          StandardizationStats stats = compute_standardization(train_data);
          train_data = apply_standardization(train_data, stats);
          test_data = apply_standardization(test_data, stats);
        }
        TrainConfig tc;
        tc.alpha = alpha;
        tc.kind = config.kind;
        tc.scope = config.scope;
        tc.optimizer = config.optimizer;
        tc.learning_rate = config.learning_rate;
        tc.steps = config.steps;
        tc.epochs = config.epochs;
        tc.queries_per_batch = config.batch_queries;
        tc.docs_per_query_cap = config.batch_docs;
        tc.seed = derive_seed(config.seed, 2 * run + 1);
        const TrainResult trained = train(train_data, tc);
        const std::vector<RankedQuery> rankings = rank_dataset(trained.model, test_data);
        for (std::size_t k : config.k_list) {
          RunRecord record;
          record.alpha = alpha;
          record.run = run;
          record.k = k;
          record.ndcg = mean_ndcg(rankings, k);
          record.precision = mean_precision(rankings, k);
          record.gamma = empirical_fairness(topk_value_table(rankings, k), config.kind);
          result.runs.push_back(record);
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("sweep failed at alpha=" + format_double(alpha) +
                                 ", run=" + std::to_string(run) + ": " + e.what());
      }
    }
  }

  for (double alpha : config.alphas) {
    for (std::size_t k : config.k_list) {
      std::vector<double> ndcgs, gammas;
      for (const RunRecord& record : result.runs)
        if (record.alpha == alpha && record.k == k) {
          ndcgs.push_back(record.ndcg);
          gammas.push_back(record.gamma);
        }
      SweepRow row;
      row.alpha = alpha;
      row.k = k;
      row.n_runs = ndcgs.size();
      row.quality_mean = sample_mean(ndcgs);
      row.gamma_mean = sample_mean(gammas);
      const double q_sd = sample_stddev(ndcgs, row.quality_mean);
      const double g_sd = sample_stddev(gammas, row.gamma_mean);
      if (config.eval_mode == EvalMode::folds) {
        const double root_n = std::sqrt(static_cast<double>(ndcgs.size()));
        row.quality_disp = q_sd / root_n;
        row.gamma_disp = g_sd / root_n;
      } else {
        row.quality_disp = q_sd;
        row.gamma_disp = g_sd;
      }
      result.table.rows.push_back(row);
    }
  }
  return result;
}

std::vector<double> significance_filter(const SweepTable& table, std::size_t k) {
  const SweepRow& baseline = row_at(table, 0.0, k);
  std::vector<double> admissible;
  for (const SweepRow& row : table.rows) {
    if (row.k != k) continue;
    if (row.quality_mean >= baseline.quality_mean - (row.quality_disp + baseline.quality_disp))
      admissible.push_back(row.alpha);
  }
  std::sort(admissible.begin(), admissible.end());
  return admissible;
}

std::vector<double> significance_filter_pooled(const SweepTable& table) {
  std::map<double, std::pair<double, double>> pooled;  // alpha -> (sum mean, sum disp)
  std::map<double, std::size_t> counts;
  for (const SweepRow& row : table.rows) {
    pooled[row.alpha].first += row.quality_mean;
    pooled[row.alpha].second += row.quality_disp;
    counts[row.alpha] += 1;
  }
  if (!pooled.count(0.0))
    throw std::invalid_argument("significance_filter_pooled: missing alpha=0 baseline");
  auto mean_of = [&](double alpha) {
    const double n = static_cast<double>(counts[alpha]);
    return std::make_pair(pooled[alpha].first / n, pooled[alpha].second / n);
  };
  const auto [q0, d0] = mean_of(0.0);
  std::vector<double> admissible;
  for (const auto& [alpha, sums] : pooled) {
    const auto [q, d] = mean_of(alpha);
    if (q >= q0 - (d + d0)) admissible.push_back(alpha);
  }
  std::sort(admissible.begin(), admissible.end());
  return admissible;
}

SummaryRecord summarize_with(const SweepTable& table, std::size_t k,
                             const std::vector<double>& admissible) {
  if (admissible.empty()) throw std::invalid_argument("summarize: empty admissible set");
  const double gamma0 = row_at(table, 0.0, k).gamma_mean;
  std::vector<double> reductions;
  for (double alpha : admissible) {
    const double gamma = row_at(table, alpha, k).gamma_mean;
    if (gamma0 > 0.0)
      reductions.push_back((gamma0 - gamma) / gamma0);
    else
      reductions.push_back(gamma == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN());
  }
  const ReductionStats stats = reduce_stats(reductions);
  SummaryRecord record;
  record.max_rel_reduction = stats.max;
  record.mean_rel_reduction = stats.mean;
  record.admissible_alphas = admissible;
  return record;
}

SummaryRecord summarize(const SweepTable& table, std::size_t k) {
  return summarize_with(table, k, significance_filter(table, k));
}

std::vector<SummaryRow> summarize_all(const SweepTable& table, const SweepConfig& config) {
  std::vector<SummaryRow> rows;
  std::vector<double> pooled;
  if (config.admissible_scope == AdmissibleScope::pooled)
    pooled = significance_filter_pooled(table);
  for (std::size_t k : config.k_list) {
    SummaryRow row;
    row.k_label = std::to_string(k);
    row.record = config.admissible_scope == AdmissibleScope::per_k
                     ? summarize(table, k)
                     : summarize_with(table, k, pooled);
    rows.push_back(std::move(row));
  }
  // Cross-cutoff average, skipping n/a entries.
  std::vector<double> maxes, means;
  for (const SummaryRow& row : rows) {
    if (!std::isnan(row.record.max_rel_reduction)) maxes.push_back(row.record.max_rel_reduction);
    if (!std::isnan(row.record.mean_rel_reduction)) means.push_back(row.record.mean_rel_reduction);
  }
  SummaryRow avg;
  avg.k_label = "avg";
  avg.record.max_rel_reduction =
      maxes.empty() ? std::numeric_limits<double>::quiet_NaN() : sample_mean(maxes);
  avg.record.mean_rel_reduction =
      means.empty() ? std::numeric_limits<double>::quiet_NaN() : sample_mean(means);
  rows.push_back(std::move(avg));
  return rows;
}

void emit_outputs(const SweepResult& result, const std::vector<SummaryRow>& summaries,
                  const SweepConfig& config) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);

  {
    std::ofstream out = open_out(dir / "sweep.csv");
    out << "alpha,k,quality_mean,quality_disp,gamma_mean,gamma_disp,n_runs\n";
    for (const SweepRow& row : result.table.rows)
      out << format_sig9(row.alpha) << ',' << row.k << ',' << format_sig9(row.quality_mean) << ','
          << format_sig9(row.quality_disp) << ',' << format_sig9(row.gamma_mean) << ','
          << format_sig9(row.gamma_disp) << ',' << row.n_runs << '\n';
  }
  {
    std::ofstream out = open_out(dir / "runs.csv");
    out << "alpha,run,k,ndcg,precision,gamma\n";
    for (const RunRecord& record : result.runs)
      out << format_sig9(record.alpha) << ',' << record.run << ',' << record.k << ','
          << format_sig9(record.ndcg) << ',' << format_sig9(record.precision) << ','
          << format_sig9(record.gamma) << '\n';
  }
  {
    std::ofstream out = open_out(dir / "summary.csv");
    out << "k,fairness,max_rel_reduction,mean_rel_reduction,admissible_alphas\n";
    for (const SummaryRow& row : summaries) {
      out << row.k_label << ',' << fairness_kind_name(config.kind) << ','
          << na_or(row.record.max_rel_reduction) << ',' << na_or(row.record.mean_rel_reduction)
          << ',';
      for (std::size_t i = 0; i < row.record.admissible_alphas.size(); ++i) {
        if (i) out << ';';
        out << format_sig9(row.record.admissible_alphas[i]);
      }
      out << '\n';
    }
  }
  for (std::size_t k : config.k_list) {
    std::ofstream out = open_out(dir / ("plotdata_k" + std::to_string(k) + ".csv"));
    out << "alpha,gamma_mean,gamma_disp,quality_mean,quality_disp\n";
    for (double alpha : config.alphas) {
      const SweepRow& row = row_at(result.table, alpha, k);
      out << format_sig9(row.alpha) << ',' << format_sig9(row.gamma_mean) << ','
          << format_sig9(row.gamma_disp) << ',' << format_sig9(row.quality_mean) << ','
          << format_sig9(row.quality_disp) << '\n';
    }
  }
}

std::vector<SummaryRow> execute_sweep(const SweepConfig& config) {
  const Dataset data = load_dataset(config.data_path, format_from_path(config.data_path));
  const SweepResult result = run_sweep(data, config);
  const std::vector<SummaryRow> summaries = summarize_all(result.table, config);
  emit_outputs(result, summaries, config);
  return summaries;
}

}  // namespace fairrank

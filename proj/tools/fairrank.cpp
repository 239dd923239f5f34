#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fairrank/bounds.hpp"
#include "fairrank/dataset.hpp"
#include "fairrank/fair_rerank.hpp"
#include "fairrank/format.hpp"
#include "fairrank/metrics.hpp"
#include "fairrank/sweep.hpp"
#include "fairrank/synthetic.hpp"
#include "fairrank/training.hpp"

namespace {

using namespace fairrank;

FileFormat resolve_format(const std::string& format, const std::string& path) {
  if (format == "tsv") return FileFormat::tsv;
  if (format == "jsonl") return FileFormat::jsonl;
  if (format == "auto") return format_from_path(path);
  throw std::invalid_argument("unknown format '" + format + "' (expected tsv, jsonl, or auto)");
}

Dataset load_input(const std::string& path, const std::string& format, bool intercept) {
  Dataset data = load_dataset(path, resolve_format(format, path));
  if (intercept) data = add_intercept(data);
  return data;
}

std::string eval_csv(const EvalRecord& r) {
  return std::to_string(r.k) + ',' + format_sig9(r.ndcg) + ',' + format_sig9(r.precision) + ',' +
         format_sig9(r.gamma_eop) + ',' + format_sig9(r.gamma_dp) + ',' + format_sig9(r.gamma_eod);
}

GapExperimentConfig parse_gap_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  GapExperimentConfig config;
  std::string selector_kind = "threshold";
  std::size_t selector_feature = 0;
  double selector_threshold = 0.0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip(line);
    if (view.empty() || view.front() == '#') continue;
    const std::size_t eq = view.find('=');
    const std::string where = path + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos)
      throw std::invalid_argument(where + ": expected key=value");
    const std::string key(strip(view.substr(0, eq)));
    const std::string value(strip(view.substr(eq + 1)));
    if (value.empty()) throw std::invalid_argument(where + ": empty value for '" + key + "'");
    if (key == "n_queries")
      config.generator.n_queries = static_cast<std::size_t>(parse_int(value, where));
    else if (key == "items_per_query")
      config.generator.items_per_query = static_cast<std::size_t>(parse_int(value, where));
    else if (key == "latent_dim")
      config.generator.latent_dim = static_cast<std::size_t>(parse_int(value, where));
    else if (key == "duplicate_prob")
      config.generator.duplicate_prob = parse_double(value, where);
    else if (key == "protected_rate")
      config.generator.protected_rate = parse_double(value, where);
    else if (key == "group_bias")
      config.generator.group_bias = parse_double(value, where);
    else if (key == "seed")
      config.generator.seed = static_cast<std::uint64_t>(parse_int(value, where));
    else if (key == "selector")
      selector_kind = value;
    else if (key == "selector_feature")
      selector_feature = static_cast<std::size_t>(parse_int(value, where));
    else if (key == "selector_threshold")
      selector_threshold = parse_double(value, where);
    else if (key == "kind")
      config.kind = parse_fairness_kind(value);
    else if (key == "vc_dim")
      config.vc_dim = static_cast<std::size_t>(parse_int(value, where));
    else if (key == "reference_items")
      config.reference_items = static_cast<std::size_t>(parse_int(value, where));
    else
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
  if (selector_kind == "threshold")
    config.selector = threshold_selector(selector_feature, selector_threshold);
  else if (selector_kind == "one")
    config.selector = [](const ItemRecord&) { return 1; };
  else
    throw std::invalid_argument(path + ": unknown selector '" + selector_kind +
                                "' (expected threshold or one)");
  return config;
}

int run(int argc, char** argv) {
  CLI::App app{"Fairness-aware learning-to-rank toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic ranking dataset");
  SyntheticConfig gen_cfg;
  std::string gen_out, gen_format = "auto";
  gen_cmd->add_option("--queries", gen_cfg.n_queries, "Number of queries")->required();
  gen_cmd->add_option("--items", gen_cfg.items_per_query, "Items per query")->required();
  gen_cmd->add_option("--latent-dim", gen_cfg.latent_dim, "Latent dimension (features are 3x)");
  gen_cmd->add_option("--duplicate-prob", gen_cfg.duplicate_prob,
                      "Chance an item duplicates an earlier one in its query");
  gen_cmd->add_option("--protected-rate", gen_cfg.protected_rate,
                      "Protected-group rate for fresh items");
  gen_cmd->add_option("--group-bias", gen_cfg.group_bias,
                      "Log-odds relevance shift for the protected group");
  gen_cmd->add_option("--seed", gen_cfg.seed, "Generator seed");
  gen_cmd->add_option("--out", gen_out, "Output path")->required();
  gen_cmd->add_option("--format", gen_format, "tsv, jsonl, or auto (by extension)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Fit a linear scoring model");
  TrainConfig train_cfg;
  std::string train_data, train_model_out, train_trace_out, train_format = "auto";
  std::string train_kind = "eop", train_scope = "amortized", train_opt = "gd";
  bool train_intercept = false;
  train_cmd->add_option("--data", train_data, "Training data")->required();
  train_cmd->add_option("--alpha", train_cfg.alpha, "Fairness penalty weight");
  train_cmd->add_option("--fairness", train_kind, "eop, dp, or eod");
  train_cmd->add_option("--scope", train_scope, "amortized or per-query");
  train_cmd->add_option("--optimizer", train_opt, "gd or sgd");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--steps", train_cfg.steps, "Gradient-descent steps (gd)");
  train_cmd->add_option("--epochs", train_cfg.epochs, "Passes over the data (sgd)");
  train_cmd->add_option("--batch-queries", train_cfg.queries_per_batch, "Queries per batch (sgd)");
  train_cmd->add_option("--batch-docs", train_cfg.docs_per_query_cap,
                        "Items kept per query in a batch (sgd)");
  train_cmd->add_option("--seed", train_cfg.seed, "Shuffling seed (sgd)");
  train_cmd->add_option("--model-out", train_model_out, "Where to write the model")->required();
  train_cmd->add_option("--trace-out", train_trace_out, "Optional per-step trace CSV");
  train_cmd->add_flag("--intercept", train_intercept, "Append a constant 1 feature");
  train_cmd->add_option("--format", train_format, "tsv, jsonl, or auto");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on labeled data");
  std::string eval_model, eval_data, eval_format = "auto";
  std::size_t eval_k = 10;
  bool eval_intercept = false;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "Evaluation data")->required();
  eval_cmd->add_option("--k", eval_k, "Ranking cutoff")->required();
  eval_cmd->add_flag("--intercept", eval_intercept, "Append a constant 1 feature");
  eval_cmd->add_option("--format", eval_format, "tsv, jsonl, or auto");

  // rerank
  auto* rerank_cmd = app.add_subcommand("rerank", "Re-rank model output under prefix quotas");
  std::string rerank_model, rerank_data, rerank_format = "auto";
  double rerank_p = 0.5, rerank_alpha_q = 0.1;
  std::size_t rerank_k = 10;
  bool rerank_intercept = false;
  rerank_cmd->add_option("--model", rerank_model, "Model file")->required();
  rerank_cmd->add_option("--data", rerank_data, "Evaluation data")->required();
  rerank_cmd->add_option("--p", rerank_p, "Target protected proportion")->required();
  rerank_cmd->add_option("--alpha-q", rerank_alpha_q, "Significance level of the quota test");
  rerank_cmd->add_option("--k", rerank_k, "Ranking cutoff")->required();
  rerank_cmd->add_flag("--intercept", rerank_intercept, "Append a constant 1 feature");
  rerank_cmd->add_option("--format", rerank_format, "tsv, jsonl, or auto");

  // bound
  auto* bound_cmd = app.add_subcommand("bound", "Print the generalization bound value");
  BoundInputs bound_inputs;
  std::string bound_kind = "eop", bound_convention = "appendix";
  bound_cmd->add_option("--n", bound_inputs.n_queries, "Number of queries")->required();
  bound_cmd->add_option("--m", bound_inputs.items_per_query, "Items per query")->required();
  bound_cmd->add_option("--vc", bound_inputs.vc_dim, "VC dimension of the selector class");
  bound_cmd->add_option("--p-min", bound_inputs.p_min, "Smallest (group, relevance) cell mass");
  bound_cmd->add_option("--q-min", bound_inputs.q_min, "Smallest group mass");
  bound_cmd->add_option("--delta", bound_inputs.delta, "Failure probability")->required();
  bound_cmd->add_option("--kind", bound_kind, "eop, dp, or eod");
  bound_cmd->add_option("--convention", bound_convention,
                        "Log constant convention: appendix or main");

  // gap-experiment
  auto* gap_cmd = app.add_subcommand("gap-experiment",
                                     "Monte-Carlo check of the generalization bound");
  std::string gap_config_path, gap_out;
  std::size_t gap_trials = 1000;
  double gap_delta = 0.01;
  gap_cmd->add_option("--config", gap_config_path, "Generator/selector config file")->required();
  gap_cmd->add_option("--trials", gap_trials, "Number of Monte-Carlo trials");
  gap_cmd->add_option("--delta", gap_delta, "Quantile level (1 - delta)");
  gap_cmd->add_option("--out", gap_out, "Per-trial CSV output")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Alpha sweep with significance-filtered summary");
  std::string sweep_config_path;
  sweep_cmd->add_option("--config", sweep_config_path, "Sweep config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen_cmd->parsed()) {
    const Dataset data = generate_synthetic(gen_cfg);
    save_dataset(data, gen_out, resolve_format(gen_format, gen_out));
    std::cout << "wrote " << data.num_queries() << " queries, " << data.total_items()
              << " items to " << gen_out << '\n';
  } else if (train_cmd->parsed()) {
    train_cfg.kind = parse_fairness_kind(train_kind);
    train_cfg.scope = parse_fairness_scope(train_scope);
    if (train_opt == "gd")
      train_cfg.optimizer = OptimizerKind::gd;
    else if (train_opt == "sgd")
      train_cfg.optimizer = OptimizerKind::sgd;
    else
      throw std::invalid_argument("unknown optimizer '" + train_opt + "' (expected gd or sgd)");
    const Dataset data = load_input(train_data, train_format, train_intercept);
    const TrainResult result = train(data, train_cfg);
    save_model(result.model, train_model_out);
    if (!train_trace_out.empty()) save_trace(result.trace, train_trace_out);
    if (result.trace.missing_cell_warnings > 0)
      std::cerr << "warning: " << result.trace.missing_cell_warnings
                << " batch fairness terms skipped for missing subgroups\n";
    std::cout << "wrote model to " << train_model_out << '\n';
  } else if (eval_cmd->parsed()) {
    const Dataset data = load_input(eval_data, eval_format, eval_intercept);
    const LinearModel model = load_model(eval_model);
    const EvalRecord record = evaluate_rankings(rank_dataset(model, data), eval_k);
    std::cout << eval_csv(record) << '\n';
  } else if (rerank_cmd->parsed()) {
    const Dataset data = load_input(rerank_data, rerank_format, rerank_intercept);
    const LinearModel model = load_model(rerank_model);
    std::size_t longest = 0;
    for (const QueryGroup& group : data.queries) longest = std::max(longest, group.items.size());
    const QuantileTable table = min_protected_table(longest, rerank_p, rerank_alpha_q);
    const RerankReport report = rerank_pipeline(model, data, table, rerank_k);
    std::cout << eval_csv(report.record) << ',' << report.infeasible_queries << '\n';
  } else if (bound_cmd->parsed()) {
    LogConstantConvention convention;
    if (bound_convention == "appendix")
      convention = LogConstantConvention::appendix;
    else if (bound_convention == "main")
      convention = LogConstantConvention::main_text;
    else
      throw std::invalid_argument("unknown convention '" + bound_convention +
                                  "' (expected appendix or main)");
    std::cout << format_sig9(complexity_term(bound_inputs, parse_fairness_kind(bound_kind),
                                             convention))
              << '\n';
  } else if (gap_cmd->parsed()) {
    GapExperimentConfig config = parse_gap_config(gap_config_path);
    config.trials = gap_trials;
    config.delta = gap_delta;
    const GapExperimentReport report = gap_experiment(config);
    save_gap_report(report, gap_out);
    std::cout << "kind=" << fairness_kind_name(report.kind)
              << " gamma_population=" << format_sig9(report.gamma_population)
              << " gap_quantile=" << format_sig9(report.gap_quantile)
              << " bound=" << format_sig9(report.bound_value)
              << " degenerate_trials=" << report.degenerate_trials << '\n';
  } else if (sweep_cmd->parsed()) {
    const SweepConfig config = parse_sweep_config_file(sweep_config_path);
    const std::vector<SummaryRow> summaries = execute_sweep(config);
    for (const SummaryRow& row : summaries) {
      std::cout << "k=" << row.k_label << " max_rel_reduction=";
      if (std::isnan(row.record.max_rel_reduction))
        std::cout << "n/a";
      else
        std::cout << format_sig9(row.record.max_rel_reduction);
      std::cout << " mean_rel_reduction=";
      if (std::isnan(row.record.mean_rel_reduction))
        std::cout << "n/a";
      else
        std::cout << format_sig9(row.record.mean_rel_reduction);
      std::cout << '\n';
    }
    std::cout << "outputs in " << config.out_dir << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

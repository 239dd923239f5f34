#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fairrank/sweep.hpp"
#include "fairrank/synthetic.hpp"
#include "testutil.hpp"

using namespace fairrank;

namespace {

SweepRow make_row(double alpha, std::size_t k, double quality_mean, double quality_disp,
                  double gamma_mean, double gamma_disp) {
  SweepRow row;
  row.alpha = alpha;
  row.k = k;
  row.quality_mean = quality_mean;
  row.quality_disp = quality_disp;
  row.gamma_mean = gamma_mean;
  row.gamma_disp = gamma_disp;
  row.n_runs = 3;
  return row;
}

// Two cutoffs, four alphas, picked so the per-k and pooled filters disagree.
SweepTable hand_table() {
  SweepTable table;
  table.rows = {
      make_row(0.0, 10, 0.80, 0.020, 0.50, 0.01),
      make_row(1.0, 10, 0.79, 0.020, 0.30, 0.01),
      make_row(2.0, 10, 0.75, 0.005, 0.10, 0.01),
      make_row(3.0, 10, 0.81, 0.000, 0.40, 0.01),
      make_row(0.0, 5, 0.70, 0.020, 0.20, 0.01),
      make_row(1.0, 5, 0.60, 0.020, 0.05, 0.01),
      make_row(2.0, 5, 0.71, 0.010, 0.25, 0.01),
      make_row(3.0, 5, 0.66, 0.030, 0.10, 0.01),
  };
  return table;
}

SweepConfig base_config(const std::string& data_path, const std::string& out_dir) {
  SweepConfig config;
  config.data_path = data_path;
  config.alphas = {0.0, 2.0};
  config.kind = FairnessKind::eop;
  config.eval_mode = EvalMode::folds;
  config.k_folds = 3;
  config.k_list = {3, 5};
  config.learning_rate = 0.05;
  config.steps = 60;
  config.seed = 11;
  config.out_dir = out_dir;
  return config;
}

Dataset sweep_dataset() {
  SyntheticConfig gen;
  gen.n_queries = 30;
  gen.items_per_query = 6;
  gen.latent_dim = 2;
  gen.protected_rate = 0.4;
  gen.group_bias = 1.0;
  gen.seed = 3;
  return generate_synthetic(gen);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

double disp_of(const std::vector<double>& values, EvalMode mode) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return mode == EvalMode::folds ? sd / std::sqrt(static_cast<double>(values.size())) : sd;
}

}  // namespace

TEST_CASE("sweep config file parsing fills every field") {
  testutil::TempDir dir("sweepcfg");
  const std::string path = dir.file("sweep.cfg");
  testutil::write_file(path,
                       "# exercise every key\n"
                       "data = /tmp/data.tsv\n"
                       "alphas = 0, 0.5, 2\n"
                       "fairness = dp\n"
                       "scope = per-query\n"
                       "eval_mode = seeds\n"
                       "k_folds = 4\n"
                       "n_seeds = 7\n"
                       "k_list = 3, 10\n"
                       "optimizer = sgd\n"
                       "lr = 0.01\n"
                       "steps = 250\n"
                       "epochs = 2\n"
                       "batch_queries = 8\n"
                       "batch_docs = 5\n"
                       "seed = 99\n"
                       "\n"
                       "out_dir = /tmp/out\n"
                       "standardize = global\n"
                       "admissible_scope = pooled\n");
  const SweepConfig config = parse_sweep_config_file(path);
  CHECK(config.data_path == "/tmp/data.tsv");
  CHECK(config.alphas == std::vector<double>{0.0, 0.5, 2.0});
  CHECK(config.kind == FairnessKind::dp);
  CHECK(config.scope == FairnessScope::per_query);
  CHECK(config.eval_mode == EvalMode::seeds);
  CHECK(config.k_folds == 4);
  CHECK(config.n_seeds == 7);
  CHECK(config.k_list == std::vector<std::size_t>{3, 10});
  CHECK(config.optimizer == OptimizerKind::sgd);
  CHECK(config.learning_rate == 0.01);
  CHECK(config.steps == 250);
  CHECK(config.epochs == 2);
  CHECK(config.batch_queries == 8);
  CHECK(config.batch_docs == 5);
  CHECK(config.seed == 99);
  CHECK(config.out_dir == "/tmp/out");
  CHECK(config.standardize == StandardizeMode::global);
  CHECK(config.admissible_scope == AdmissibleScope::pooled);
}

TEST_CASE("sweep config defaults survive a minimal file") {
  testutil::TempDir dir("sweepmin");
  const std::string path = dir.file("min.cfg");
  testutil::write_file(path, "data=d.tsv\nalphas=0,1\nout_dir=out\n");
  const SweepConfig config = parse_sweep_config_file(path);
  CHECK(config.kind == FairnessKind::eop);
  CHECK(config.scope == FairnessScope::amortized);
  CHECK(config.eval_mode == EvalMode::folds);
  CHECK(config.k_folds == 5);
  CHECK(config.n_seeds == 10);
  CHECK(config.k_list == std::vector<std::size_t>{10});
  CHECK(config.optimizer == OptimizerKind::gd);
  CHECK(config.learning_rate == 0.003);
  CHECK(config.steps == 1500);
  CHECK(config.standardize == StandardizeMode::train);
  CHECK(config.admissible_scope == AdmissibleScope::per_k);
}

TEST_CASE("sweep config file errors carry file and line") {
  testutil::TempDir dir("sweeperr");
  auto expect_error = [&](const std::string& body, const std::string& fragment) {
    const std::string path = dir.file("bad.cfg");
    testutil::write_file(path, body);
    CHECK_THROWS_WITH_AS(parse_sweep_config_file(path), doctest::Contains(fragment.c_str()),
                         std::invalid_argument);
  };
  expect_error("data=d\nalphas=0\nout_dir=o\nwhatever=1\n", ":4: unknown key 'whatever'");
  expect_error("data=d\nno equals sign\n", ":2: expected key=value");
  expect_error("data=d\nlr=\n", ":2: empty value");
  expect_error("alphas=0\nout_dir=o\n", "missing required key 'data'");
  expect_error("data=d\nout_dir=o\n", "missing required key 'alphas'");
  expect_error("data=d\nalphas=0\n", "missing required key 'out_dir'");
  expect_error("data=d\nalphas=0\nout_dir=o\neval_mode=both\n", "unknown eval_mode");
  expect_error("data=d\nalphas=0\nout_dir=o\nlr=fast\n", "bad number");
  expect_error("data=d\nalphas=1,2\nout_dir=o\n", "must include 0");
  expect_error("data=d\nalphas=0,1,1\nout_dir=o\n", "duplicate alpha");
  expect_error("data=d\nalphas=0,-1\nout_dir=o\n", "non-negative");
  expect_error("data=d\nalphas=0\nout_dir=o\nk_list=0\n", "positive");
  expect_error("data=d\nalphas=0\nout_dir=o\nk_folds=1\n", "at least 2");
  CHECK_THROWS_AS(parse_sweep_config_file(dir.file("missing.cfg")), std::runtime_error);
}

TEST_CASE("validate_sweep_config checks mode-specific knobs") {
  SweepConfig config;
  config.data_path = "d";
  config.out_dir = "o";
  config.alphas = {0.0};
  config.eval_mode = EvalMode::seeds;
  config.n_seeds = 0;
  CHECK_THROWS_AS(validate_sweep_config(config), std::invalid_argument);
  config.n_seeds = 1;
  CHECK_NOTHROW(validate_sweep_config(config));
  config.k_list = {};
  CHECK_THROWS_AS(validate_sweep_config(config), std::invalid_argument);
  config.k_list = {10};
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(validate_sweep_config(config), std::invalid_argument);
}

TEST_CASE("significance filter keeps alphas within one dispersion of the baseline") {
  const SweepTable table = hand_table();
  CHECK(significance_filter(table, 10) == std::vector<double>{0.0, 1.0, 3.0});
  CHECK(significance_filter(table, 5) == std::vector<double>{0.0, 2.0, 3.0});
  CHECK_THROWS_AS(significance_filter(table, 7), std::invalid_argument);

  // Pooled variant averages quality over cutoffs first.
  CHECK(significance_filter_pooled(table) == std::vector<double>{0.0, 2.0, 3.0});
}

TEST_CASE("summarize computes relative reductions over the admissible set") {
  const SweepTable table = hand_table();
  const SummaryRecord at10 = summarize(table, 10);
  // gamma0 = 0.5; admissible gammas 0.5, 0.3, 0.4 -> reductions 0, 0.4, 0.2.
  CHECK(at10.max_rel_reduction == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(at10.mean_rel_reduction == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(at10.admissible_alphas == std::vector<double>{0.0, 1.0, 3.0});

  // A fairness regression shows up as a negative reduction, not a clamp.
  const SummaryRecord at5 = summarize(table, 5);
  CHECK(at5.max_rel_reduction == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(at5.mean_rel_reduction == doctest::Approx(0.25 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(summarize_with(table, 10, {}), std::invalid_argument);
}

TEST_CASE("summarize handles a zero-gamma baseline") {
  SweepTable table;
  table.rows = {
      make_row(0.0, 1, 0.5, 0.1, 0.0, 0.0),
      make_row(1.0, 1, 0.5, 0.1, 0.0, 0.0),
      make_row(0.0, 2, 0.5, 0.1, 0.0, 0.0),
      make_row(1.0, 2, 0.5, 0.1, 0.1, 0.0),
  };
  const SummaryRecord clean = summarize(table, 1);
  CHECK(clean.max_rel_reduction == 0.0);
  CHECK(clean.mean_rel_reduction == 0.0);

  // Zero baseline with a nonzero regularized gamma is undefined.
  const SummaryRecord undefined = summarize(table, 2);
  CHECK(std::isnan(undefined.max_rel_reduction));
  CHECK(std::isnan(undefined.mean_rel_reduction));

  SweepConfig config;
  config.k_list = {1, 2};
  std::vector<SummaryRow> rows = summarize_all(table, config);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].k_label == "1");
  CHECK(rows[1].k_label == "2");
  CHECK(rows[2].k_label == "avg");
  // The average skips the undefined cutoff instead of poisoning it.
  CHECK(rows[2].record.max_rel_reduction == 0.0);
  CHECK(rows[2].record.mean_rel_reduction == 0.0);

  config.k_list = {2};
  rows = summarize_all(table, config);
  CHECK(std::isnan(rows.back().record.max_rel_reduction));
}

TEST_CASE("run_sweep produces one record per alpha, run, and cutoff") {
  const Dataset data = sweep_dataset();
  testutil::TempDir dir("sweeprun");
  const SweepConfig config = base_config("unused", dir.file("out"));
  const SweepResult result = run_sweep(data, config);

  CHECK(result.runs.size() == 2 * 3 * 2);
  REQUIRE(result.table.rows.size() == 4);
  for (const SweepRow& row : result.table.rows) {
    CHECK(row.n_runs == 3);
    CHECK(row.quality_mean >= 0.0);
    CHECK(row.quality_mean <= 1.0);
    CHECK(row.gamma_mean >= 0.0);
    CHECK(row.quality_disp >= 0.0);
  }

  // Every (alpha, k) cell appears exactly once.
  for (double alpha : config.alphas)
    for (std::size_t k : config.k_list) {
      std::size_t hits = 0;
      for (const SweepRow& row : result.table.rows)
        if (row.alpha == alpha && row.k == k) ++hits;
      CHECK(hits == 1);
    }

  // Dispersion in folds mode is the standard error of the per-fold values.
  for (const SweepRow& row : result.table.rows) {
    std::vector<double> ndcgs, gammas;
    for (const RunRecord& record : result.runs)
      if (record.alpha == row.alpha && record.k == row.k) {
        ndcgs.push_back(record.ndcg);
        gammas.push_back(record.gamma);
      }
    CHECK(row.quality_disp == doctest::Approx(disp_of(ndcgs, EvalMode::folds)).epsilon(1e-12));
    CHECK(row.gamma_disp == doctest::Approx(disp_of(gammas, EvalMode::folds)).epsilon(1e-12));
  }

  // Bitwise repeatability.
  const SweepResult again = run_sweep(data, config);
  REQUIRE(again.runs.size() == result.runs.size());
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    CHECK(again.runs[i].ndcg == result.runs[i].ndcg);
    CHECK(again.runs[i].gamma == result.runs[i].gamma);
  }
}

TEST_CASE("run_sweep in seed mode uses repeated holdouts and plain deviation") {
  const Dataset data = sweep_dataset();
  testutil::TempDir dir("sweepseed");
  SweepConfig config = base_config("unused", dir.file("out"));
  config.eval_mode = EvalMode::seeds;
  config.n_seeds = 4;
  const SweepResult result = run_sweep(data, config);
  CHECK(result.runs.size() == 2 * 4 * 2);
  for (const SweepRow& row : result.table.rows) {
    CHECK(row.n_runs == 4);
    std::vector<double> ndcgs;
    for (const RunRecord& record : result.runs)
      if (record.alpha == row.alpha && record.k == row.k) ndcgs.push_back(record.ndcg);
    CHECK(row.quality_disp == doctest::Approx(disp_of(ndcgs, EvalMode::seeds)).epsilon(1e-12));
  }
}

TEST_CASE("run_sweep wraps failures with the offending alpha and run") {
  const Dataset data = sweep_dataset();
  testutil::TempDir dir("sweepfail");
  SweepConfig config = base_config("unused", dir.file("out"));
  config.learning_rate = 1e12;  // diverges immediately
  CHECK_THROWS_WITH_AS(run_sweep(data, config), doctest::Contains("sweep failed at alpha=0"),
                       std::runtime_error);

  // A one-group dataset cannot be scored for fairness on the held-out side.
  std::vector<QueryGroup> queries;
  for (int q = 0; q < 6; ++q) {
    QueryGroup group;
    group.query_id = "q" + std::to_string(q);
    for (int j = 0; j < 4; ++j)
      group.items.push_back(testutil::item(group.query_id, "d" + std::to_string(j), j % 2, 0,
                                           {0.1 * j, 1.0}));
    queries.push_back(std::move(group));
  }
  SweepConfig strict = base_config("unused", dir.file("out2"));
  strict.alphas = {0.0};
  strict.k_folds = 2;
  strict.k_list = {2};
  CHECK_THROWS_WITH_AS(run_sweep(testutil::dataset_of(queries), strict),
                       doctest::Contains("sweep failed"), std::runtime_error);
}

TEST_CASE("execute_sweep writes the full report set deterministically") {
  const Dataset data = sweep_dataset();
  testutil::TempDir dir("sweepexec");
  const std::string data_path = dir.file("data.tsv");
  save_dataset(data, data_path, FileFormat::tsv);

  SweepConfig config = base_config(data_path, dir.file("out_a"));
  const std::vector<SummaryRow> summaries = execute_sweep(config);
  REQUIRE(summaries.size() == 3);
  CHECK(summaries[0].k_label == "3");
  CHECK(summaries[1].k_label == "5");
  CHECK(summaries[2].k_label == "avg");
  for (const SummaryRow& row : summaries)
    if (row.k_label != "avg") {
      CHECK(!row.record.admissible_alphas.empty());
      CHECK(row.record.admissible_alphas.front() == 0.0);
      CHECK(std::is_sorted(row.record.admissible_alphas.begin(),
                           row.record.admissible_alphas.end()));
    }

  const std::vector<std::string> sweep_lines = read_lines(dir.file("out_a") / "sweep.csv");
  REQUIRE(sweep_lines.size() == 1 + 4);
  CHECK(sweep_lines[0] == "alpha,k,quality_mean,quality_disp,gamma_mean,gamma_disp,n_runs");
  const std::vector<std::string> run_lines = read_lines(dir.file("out_a") / "runs.csv");
  REQUIRE(run_lines.size() == 1 + 12);
  CHECK(run_lines[0] == "alpha,run,k,ndcg,precision,gamma");
  const std::vector<std::string> summary_lines = read_lines(dir.file("out_a") / "summary.csv");
  REQUIRE(summary_lines.size() == 1 + 3);
  CHECK(summary_lines[0] == "k,fairness,max_rel_reduction,mean_rel_reduction,admissible_alphas");
  CHECK(summary_lines[1].rfind("3,eop,", 0) == 0);
  CHECK(summary_lines[3].rfind("avg,eop,", 0) == 0);
  for (std::size_t k : {3, 5}) {
    const std::vector<std::string> plot_lines =
        read_lines(dir.file("out_a") / ("plotdata_k" + std::to_string(k) + ".csv"));
    REQUIRE(plot_lines.size() == 1 + 2);
    CHECK(plot_lines[0] == "alpha,gamma_mean,gamma_disp,quality_mean,quality_disp");
    CHECK(plot_lines[1].rfind("0,", 0) == 0);
    CHECK(plot_lines[2].rfind("2,", 0) == 0);
  }

  config.out_dir = dir.file("out_b");
  execute_sweep(config);
  for (const char* name : {"sweep.csv", "runs.csv", "summary.csv", "plotdata_k3.csv",
                           "plotdata_k5.csv"}) {
    CHECK(testutil::read_file(dir.file("out_a") / name) ==
          testutil::read_file(dir.file("out_b") / name));
  }
}

TEST_CASE("global standardization mode runs end to end") {
  const Dataset data = sweep_dataset();
  testutil::TempDir dir("sweepglob");
  SweepConfig config = base_config("unused", dir.file("out"));
  config.standardize = StandardizeMode::global;
  config.alphas = {0.0, 1.0};
  const SweepResult result = run_sweep(data, config);
  CHECK(result.runs.size() == 2 * 3 * 2);
  SweepConfig off = config;
  off.standardize = StandardizeMode::off;
  const SweepResult raw = run_sweep(data, off);
  CHECK(raw.runs.size() == result.runs.size());
}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stir/corpus.hpp"
#include "stir/eval.hpp"
#include "stir/pipeline.hpp"
#include "stir/ranking.hpp"
#include "stir/stream.hpp"
#include "stir/sweep.hpp"
#include "stir/synth.hpp"
#include "stir/training.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct Args {
  std::uint64_t seed = 1;

  // synth
  std::string out = "-";
  stir::SynthConfig synth;

  // train
  std::string corpus;
  std::size_t folds = 10;
  double probe_rate = 0.2;
  std::array<double, stir::kStageCount> fn = {1, 8, 4, 4};
  bool seed_set = false;

  // detect / evaluate / sweep
  std::string bundle;
  std::string input = "-";
  std::size_t capacity = 1;
  std::string kv;
  std::string results;
  std::size_t workers = 1;
  std::size_t limit = 0;
  std::vector<double> rp_start_costs, rm_start_costs, rp_end_costs;
  std::vector<std::size_t> capacities;

  // rank-features
  std::string examples;
  std::string stage;
};

std::vector<stir::Utterance> load_corpus(const std::string& path) {
  return stir::utterances_of(stir::read_corpus_file(path));
}

int cmd_synth(const Args& a) {
  stir::SynthConfig cfg = a.synth;
  cfg.seed = a.seed;
  const auto corpus = stir::generate_synthetic(cfg);
  if (a.out == "-") {
    stir::write_corpus(std::cout, corpus);
  } else {
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    stir::write_corpus(out, corpus);
  }
  return 0;
}

int cmd_train(const Args& a) {
  stir::TrainOptions opts;
  opts.folds = a.folds;
  opts.seed = a.seed;
  opts.probe_rate = a.probe_rate;
  for (std::size_t i = 0; i < stir::kStageCount; ++i) opts.costs[i] = {a.fn[i], 1.0};
  const auto corpus = load_corpus(a.corpus);
  const auto bundle = stir::train_bundle(corpus, opts);
  stir::save_bundle(bundle, a.out);
  for (stir::Stage s : {stir::Stage::Edit, stir::Stage::RpStart, stir::Stage::RmStart, stir::Stage::RpEnd}) {
    const auto& d = bundle.examples[static_cast<std::size_t>(s)];
    std::cerr << "stage " << stir::to_string(s) << ": " << d.rows() << " examples, " << d.positives()
              << " positive\n";
  }
  return 0;
}

int cmd_detect(const Args& a) {
  const auto bundle = stir::load_bundle(a.bundle);
  stir::ForestClassifier cls(bundle.forests);
  stir::DetectorConfig cfg;
  cfg.capacity = a.capacity;
  stir::StreamStats stats;
  if (a.input == "-") {
    stats = stir::detect_stream(std::cin, std::cout, bundle.lms.set(), cls, cfg);
  } else {
    std::ifstream in(a.input);
    if (!in) throw std::runtime_error("cannot open " + a.input);
    stats = stir::detect_stream(in, std::cout, bundle.lms.set(), cls, cfg);
  }
  return stats.errors == 0 ? 0 : kDataError;
}

int cmd_evaluate(const Args& a) {
  const auto bundle = stir::load_bundle(a.bundle);
  const auto test = load_corpus(a.corpus);
  const auto report = stir::evaluate_forests(bundle.lms, bundle.forests, test, a.capacity);
  stir::write_report_table(std::cout, {a.bundle}, {report});
  if (!a.kv.empty()) {
    std::ofstream out(a.kv);
    if (!out) throw std::runtime_error("cannot write " + a.kv);
    stir::write_report_kv(out, report);
  } else {
    stir::write_report_kv(std::cout, report);
  }
  return 0;
}

int cmd_sweep(const Args& a) {
  const auto bundle = stir::load_bundle(a.bundle, true);
  const auto test = load_corpus(a.corpus);
  stir::SweepGrid grid = stir::SweepGrid::full();
  if (!a.rp_start_costs.empty()) grid.rp_start_fn = a.rp_start_costs;
  if (!a.rm_start_costs.empty()) grid.rm_start_fn = a.rm_start_costs;
  if (!a.rp_end_costs.empty()) grid.rp_end_fn = a.rp_end_costs;
  if (!a.capacities.empty()) grid.capacities = a.capacities;
  stir::SweepOptions opts;
  opts.workers = a.workers;
  opts.limit = a.limit;
  opts.results = a.results.empty() ? std::filesystem::path(a.bundle) / "sweep.jsonl" : std::filesystem::path(a.results);
  opts.edit_fn = bundle.options.costs[static_cast<std::size_t>(stir::Stage::Edit)].fn_cost;
  stir::ForestParams params = bundle.options.forest;
  params.seed = a.seed_set ? a.seed : bundle.options.seed;
  const auto results = stir::run_sweep(bundle.lms, bundle.examples, params, test, grid, opts);
  std::cerr << results.size() << " of " << grid.cost_configs() * grid.capacities.size()
            << " settings evaluated; results in " << opts.results.string() << '\n';
  stir::write_sweep_table(std::cout, results);
  return 0;
}

int cmd_rank(const Args& a) {
  stir::Dataset data;
  std::string stage = a.stage;
  if (!a.examples.empty()) {
    std::ifstream in(a.examples);
    if (!in) throw std::runtime_error("cannot open " + a.examples);
    data = stir::read_dataset(in);
  } else {
    if (stage.empty()) throw std::invalid_argument("rank-features: --stage is required with --bundle");
    const auto bundle = stir::load_bundle(a.bundle, true);
    data = bundle.examples[static_cast<std::size_t>(stir::stage_from_string(stage))];
  }
  if (!stage.empty()) stir::check_manifest(stir::stage_from_string(stage), data.names);
  const auto ranking = stir::information_gain_ranking(data, a.folds, a.seed);
  if (ranking.single_class) std::cerr << "warning: single-class data, all merits are zero\n";
  std::printf("%-28s %9s %9s %7s %7s\n", "feature", "merit", "merit_sd", "rank", "rank_sd");
  for (const auto& f : ranking.features)
    std::printf("%-28s %9.5f %9.5f %7.2f %7.2f\n", f.name.c_str(), f.merit, f.merit_sd, f.rank,
                f.rank_sd);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental speech-repair detector"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);
  Args a;

  auto seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          a.seed = v;
          a.seed_set = true;
        },
        "Random seed (default 1)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  synth->add_option("-o,--out", a.out, "Output corpus file, - for stdout");
  synth->add_option("-n,--utterances", a.synth.n_utts, "Number of utterances")->check(CLI::PositiveNumber);
  synth->add_option("--vocab", a.synth.vocab_size, "Vocabulary size");
  synth->add_option("--repair-rate", a.synth.repair_rate, "Share of utterances with a repair")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--repeat", a.synth.kind_mix[0], "Repeat share among repairs")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--substitute", a.synth.kind_mix[1], "Substitution share")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--delete", a.synth.kind_mix[2], "Delete share")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--interregnum-rate", a.synth.interregnum_rate, "Share of repairs with an interregnum")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--isolated-edit-rate", a.synth.isolated_edit_rate, "Share of utterances with an isolated edit term")
      ->check(CLI::Range(0.0, 1.0));
  seed(synth);

  auto* train = app.add_subcommand("train", "Cross-fold feature generation and forest training");
  train->add_option("-c,--corpus", a.corpus, "Annotated training corpus")->required();
  train->add_option("-o,--out", a.out, "Bundle directory")->required();
  train->add_option("--folds", a.folds, "Folds for out-of-fold LM features")->check(CLI::Range(2, 1000));
  train->add_option("--probe-rate", a.probe_rate, "Share of negative onsets used for extra rm_start examples")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--edit-fn", a.fn[0], "False-negative cost, edit stage")->check(CLI::NonNegativeNumber);
  train->add_option("--rp-start-fn", a.fn[1], "False-negative cost, rp_start stage")->check(CLI::NonNegativeNumber);
  train->add_option("--rm-start-fn", a.fn[2], "False-negative cost, rm_start stage")->check(CLI::NonNegativeNumber);
  train->add_option("--rp-end-fn", a.fn[3], "False-negative cost, rp_end stage")->check(CLI::NonNegativeNumber);
  seed(train);

  auto* detect = app.add_subcommand("detect", "Stream word<TAB>pos lines through a trained bundle");
  detect->add_option("-b,--bundle", a.bundle, "Bundle directory")->required();
  detect->add_option("-i,--input", a.input, "Input file, - for stdin");
  detect->add_option("--capacity", a.capacity, "Hypotheses kept per onset")->check(CLI::Range(1, 2));
  seed(detect);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a bundle on an annotated corpus");
  evaluate->add_option("-b,--bundle", a.bundle, "Bundle directory")->required();
  evaluate->add_option("-c,--corpus", a.corpus, "Annotated test corpus")->required();
  evaluate->add_option("--capacity", a.capacity, "Hypotheses kept per onset")->check(CLI::Range(1, 2));
  evaluate->add_option("--kv", a.kv, "Write key=value metrics here instead of stdout");
  seed(evaluate);

  auto* sweep = app.add_subcommand("sweep", "Evaluate the cost-function grid");
  sweep->add_option("-b,--bundle", a.bundle, "Bundle directory (with examples)")->required();
  sweep->add_option("-c,--corpus", a.corpus, "Annotated test corpus")->required();
  sweep->add_option("--results", a.results, "JSON-lines results file; resumed if present");
  sweep->add_option("--workers", a.workers, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--limit", a.limit, "Stop after this many new settings");
  sweep->add_option("--rp-start-costs", a.rp_start_costs, "rp_start fn costs")->delimiter(',');
  sweep->add_option("--rm-start-costs", a.rm_start_costs, "rm_start fn costs")->delimiter(',');
  sweep->add_option("--rp-end-costs", a.rp_end_costs, "rp_end fn costs")->delimiter(',');
  sweep->add_option("--capacities", a.capacities, "Stack capacities")->delimiter(',')->check(CLI::Range(1, 2));
  seed(sweep);

  auto* rank = app.add_subcommand("rank-features", "Cross-validated information-gain feature ranking");
  rank->add_option("-b,--bundle", a.bundle, "Bundle directory (with examples)");
  rank->add_option("-e,--examples", a.examples, "Example table (TSV)");
  rank->add_option("-s,--stage", a.stage, "Stage: edit, rp_start, rm_start, rp_end");
  rank->add_option("--folds", a.folds, "Folds")->check(CLI::Range(2, 1000));
  seed(rank);

  try {
    app.parse(argc, argv);
    if (rank->parsed() && a.bundle.empty() == a.examples.empty())
      throw CLI::ValidationError("rank-features", "give exactly one of --bundle and --examples");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(a);
    if (train->parsed()) return cmd_train(a);
    if (detect->parsed()) return cmd_detect(a);
    if (evaluate->parsed()) return cmd_evaluate(a);
    if (sweep->parsed()) return cmd_sweep(a);
    if (rank->parsed()) return cmd_rank(a);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

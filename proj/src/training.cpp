#include "stir/training.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace stir {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr Stage kStages[] = {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd};

std::string forest_file(Stage s) { return "forest_" + std::string(to_string(s)) + ".txt"; }
std::string examples_file(Stage s) { return "examples_" + std::string(to_string(s)) + ".tsv"; }
std::string manifest_file(Stage s) { return "manifest_" + std::string(to_string(s)) + ".txt"; }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

}  // namespace

std::string LanguageModels::provenance() const {
  return "lex=" + hex(lex.fingerprint()) + " pos=" + hex(pos.fingerprint()) +
         " edit=" + hex(edit.fingerprint());
}

LanguageModels train_language_models(const std::vector<Utterance>& corpus) {
  std::vector<std::vector<std::string>> words, tags, edits;
  for (const auto& u : corpus) {
    const auto clean = cleaned_tokens(u);
    if (!clean.empty()) {
      auto& w = words.emplace_back();
      auto& p = tags.emplace_back();
      for (const auto& t : clean) {
        w.push_back(t.word);
        p.push_back(t.pos);
      }
    }
    for (auto& span : edit_spans(u)) edits.push_back(std::move(span));
  }
  if (words.empty()) throw std::invalid_argument("training corpus has no fluent words");
  if (edits.empty()) throw std::invalid_argument("training corpus has no edit terms");
  return {train_kn(words, 3), train_kn(tags, 3), train_edit_bigram(edits)};
}

StageDatasets empty_datasets() {
  return {Dataset(Stage::Edit), Dataset(Stage::RpStart), Dataset(Stage::RmStart), Dataset(Stage::RpEnd)};
}

void collect_examples(const LmSet& lms, const std::vector<Utterance>& corpus, StageDatasets& out,
                      double probe_rate, std::uint64_t seed) {
  std::array<Dataset*, kStageCount> sinks{&out[0], &out[1], &out[2], &out[3]};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    GoldOracle oracle(corpus[i], sinks, probe_rate, mix(seed + i));
    run_detector(lms, oracle, corpus[i]);
  }
}

StageDatasets cross_fold_examples(const std::vector<Utterance>& corpus, std::size_t folds,
                                  double probe_rate, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-fold training needs at least 2 folds");
  if (corpus.size() < folds)
    throw std::invalid_argument("corpus has " + std::to_string(corpus.size()) +
                                " utterances, too few for " + std::to_string(folds) + " folds");
  const auto index = split_fold_indices(corpus.size(), folds, seed);
  StageDatasets out = empty_datasets();
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<Utterance> train, held;
    for (std::size_t j = 0; j < folds; ++j)
      for (std::size_t i : index[j]) (j == k ? held : train).push_back(corpus[i]);
    const LanguageModels lms = train_language_models(train);
    collect_examples(lms.set(), held, out, probe_rate, mix(seed ^ (k + 1)));
  }
  return out;
}

std::uint64_t stage_seed(std::uint64_t seed, Stage s) {
  return mix(seed * 31 + static_cast<std::uint64_t>(s) + 1);
}

Forest train_stage_forest(Stage s, const Dataset& data, const CostMatrix& cost,
                          const ForestParams& params, const std::string& provenance) {
  ForestParams p = params;
  p.seed = stage_seed(params.seed, s);
  Forest f = train_forest(s, data, cost, p);
  f.set_provenance(provenance);
  return f;
}

ForestSet train_forests(const StageDatasets& data, const StageCosts& costs,
                        const ForestParams& params, const std::string& provenance) {
  ForestSet set;
  for (Stage s : kStages) {
    const auto i = static_cast<std::size_t>(s);
    set.at(s) = train_stage_forest(s, data[i], costs[i], params, provenance);
  }
  return set;
}

StageCosts TrainOptions::default_costs() {
  return {CostMatrix{1, 1}, CostMatrix{8, 1}, CostMatrix{4, 1}, CostMatrix{4, 1}};
}

Bundle train_bundle(const std::vector<Utterance>& corpus, const TrainOptions& options) {
  TrainOptions opts = options;
  opts.forest.seed = options.seed;
  auto examples = cross_fold_examples(corpus, opts.folds, opts.probe_rate, opts.seed);
  auto lms = train_language_models(corpus);
  auto forests = train_forests(examples, opts.costs, opts.forest, lms.provenance());
  return Bundle{opts, std::move(lms), std::move(forests), std::move(examples)};
}

void save_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "stir-bundle";
  j["version"] = 1;
  j["folds"] = b.options.folds;
  j["seed"] = b.options.seed;
  j["probe_rate"] = b.options.probe_rate;
  j["provenance"] = b.lms.provenance();
  const auto& p = b.options.forest;
  j["forest"] = {{"n_trees", p.n_trees},
                 {"max_depth", p.max_depth},
                 {"metacost_iterations", p.metacost_iterations},
                 {"resample_fraction", p.resample_fraction},
                 {"max_bins", p.max_bins}};
  {
    auto out = open_out(dir / "lex.ngram");
    b.lms.lex.save(out);
  }
  {
    auto out = open_out(dir / "pos.ngram");
    b.lms.pos.save(out);
  }
  {
    auto out = open_out(dir / "edit.ngram");
    b.lms.edit.save(out);
  }
  for (Stage s : kStages) {
    const auto i = static_cast<std::size_t>(s);
    const std::string name(to_string(s));
    j["costs"][name] = {{"fn", b.options.costs[i].fn_cost}, {"fp", b.options.costs[i].fp_cost}};
    j["examples"][name] = {{"rows", b.examples[i].rows()}, {"positives", b.examples[i].positives()}};
    {
      auto out = open_out(dir / forest_file(s));
      b.forests.at(s).save(out);
    }
    {
      auto out = open_out(dir / manifest_file(s));
      write_manifest(out, s);
    }
    {
      auto out = open_out(dir / examples_file(s));
      write_dataset(out, b.examples[i]);
    }
  }
  auto out = open_out(dir / "bundle.json");
  out << j.dump(2) << '\n';
}

Bundle load_bundle(const std::filesystem::path& dir, bool with_examples) {
  nlohmann::json j;
  {
    auto in = open_in(dir / "bundle.json");
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("bundle.json: " + std::string(e.what()));
    }
  }
  if (j.value("format", "") != "stir-bundle" || j.value("version", 0) != 1)
    throw std::runtime_error("bundle.json: not a version 1 stir bundle");
  TrainOptions options;
  try {
    options.folds = j.at("folds").get<std::size_t>();
    options.seed = j.at("seed").get<std::uint64_t>();
    options.probe_rate = j.at("probe_rate").get<double>();
    for (Stage s : kStages) {
      const auto& c = j.at("costs").at(std::string(to_string(s)));
      options.costs[static_cast<std::size_t>(s)] = {c.at("fn").get<double>(), c.at("fp").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bundle.json: " + std::string(e.what()));
  }
  auto load_lm = [&](const char* name) {
    auto in = open_in(dir / name);
    return NGramModel::load(in);
  };
  Bundle b{options, {load_lm("lex.ngram"), load_lm("pos.ngram"), load_lm("edit.ngram")}, {}, empty_datasets()};
  const std::string prov = b.lms.provenance();
  if (j.value("provenance", "") != prov)
    throw std::runtime_error("bundle: language models do not match the recorded provenance");
  for (Stage s : kStages) {
    {
      auto in = open_in(dir / forest_file(s));
      b.forests.at(s) = Forest::load(in);
    }
    if (b.forests.at(s).stage() != s)
      throw std::runtime_error("bundle: " + forest_file(s) + " holds the wrong stage");
    if (b.forests.at(s).provenance() != prov)
      throw std::runtime_error("bundle: forest for stage " + std::string(to_string(s)) +
                               " was trained against different language models");
    {
      auto in = open_in(dir / manifest_file(s));
      check_manifest(in, s);
    }
    if (with_examples) {
      auto in = open_in(dir / examples_file(s));
      b.examples[static_cast<std::size_t>(s)] = read_dataset(in);
      check_manifest(s, b.examples[static_cast<std::size_t>(s)].names);
    }
  }
  b.options.forest = b.forests.at(Stage::Edit).params();
  b.options.forest.seed = b.options.seed;
  return b;
}

}  // namespace stir

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stir/corpus.hpp"
#include "stir/dataset.hpp"
#include "stir/forest.hpp"
#include "stir/lm.hpp"
#include "stir/pipeline.hpp"

namespace stir {

/// Fluent word and POS trigram models plus the edit-term bigram model.
struct LanguageModels {
  NGramModel lex;
  NGramModel pos;
  NGramModel edit;

  LmSet set() const { return {&lex, &pos, &edit}; }
  /// Identifies the models by fingerprint; forests record it as provenance.
  std::string provenance() const;
};

/// Trains on the cleaned corpus (reparanda and edit terms removed); the edit
/// model sees the edit-term spans. Throws if the corpus has no edit terms.
LanguageModels train_language_models(const std::vector<Utterance>& corpus);

using StageDatasets = std::array<Dataset, kStageCount>;
using StageCosts = std::array<CostMatrix, kStageCount>;

StageDatasets empty_datasets();

/// Runs the detector under gold decisions over `corpus` with `lms` and
/// appends one labeled example per stage query.
void collect_examples(const LmSet& lms, const std::vector<Utterance>& corpus,
                      StageDatasets& out, double probe_rate, std::uint64_t seed);

/// Out-of-fold examples: fold k's features come from models trained on the
/// other folds. Requires 2 <= folds <= corpus size.
StageDatasets cross_fold_examples(const std::vector<Utterance>& corpus, std::size_t folds,
                                  double probe_rate, std::uint64_t seed);

/// Per-stage forest seed derived from the run seed.
std::uint64_t stage_seed(std::uint64_t seed, Stage s);

Forest train_stage_forest(Stage s, const Dataset& data, const CostMatrix& cost,
                          const ForestParams& params, const std::string& provenance);

ForestSet train_forests(const StageDatasets& data, const StageCosts& costs,
                        const ForestParams& params, const std::string& provenance);

struct TrainOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  StageCosts costs = default_costs();
  double probe_rate = 0.2;  // share of negative onsets whose rm search is recorded
  ForestParams forest;

  static StageCosts default_costs();
};

struct Bundle {
  TrainOptions options;
  LanguageModels lms;
  ForestSet forests;
  StageDatasets examples;
};

Bundle train_bundle(const std::vector<Utterance>& corpus, const TrainOptions& options);

/// Writes lex/pos/edit models, one forest per stage, the example tables and
/// bundle.json. Output bytes depend only on the bundle contents.
void save_bundle(const Bundle& b, const std::filesystem::path& dir);
/// Loads and cross-checks the forests' provenance against the models.
Bundle load_bundle(const std::filesystem::path& dir, bool with_examples = false);

}  // namespace stir

#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "stir/corpus.hpp"
#include "stir/dag.hpp"
#include "stir/dataset.hpp"
#include "stir/features.hpp"
#include "stir/forest.hpp"

namespace stir {

/// One add or revoke of a tag on a word. An add without a tag marks a newly
/// consumed word as fluent.
struct LabelEdit {
  enum class Op : std::uint8_t { Add, Revoke };
  Op op = Op::Add;
  std::size_t index = 0;
  std::optional<Tag> tag;

  friend bool operator==(const LabelEdit&, const LabelEdit&) = default;
};

std::string to_string(const LabelEdit& e);

using LabelState = std::vector<TagSet>;

/// Applies edits in order; grows the state to cover new indices. Throws
/// std::logic_error on a revoke of an unasserted tag.
void apply_edits(LabelState& state, const std::vector<LabelEdit>& edits);

enum class HypState : std::uint8_t { Open, Closed };

struct RepairHypothesis {
  std::size_t id = 0;
  std::size_t rm_start = 0;
  std::vector<std::size_t> interregnum;
  std::size_t rp_start = 0;
  std::optional<std::size_t> rp_end;
  double score = 0.0;
  HypState state = HypState::Open;
  bool active = false;  // emits tags; shadows wait for promotion
  RepairKind kind = RepairKind::Substitute;
};

/// What a classifier is asked. `target` is the word under test: the edit
/// candidate, the onset, the reparandum candidate, or the candidate end.
struct StageQuery {
  Stage stage = Stage::Edit;
  std::size_t n = 0;
  std::size_t target = 0;
  std::size_t rm_start = 0;  // rp_end only
  std::size_t rp_start = 0;  // rm_start and rp_end
  bool zero_length = false;
  bool revisit = false;
};

struct Decision {
  bool positive = false;
  double score = 0.0;
};

class StageClassifier {
 public:
  virtual ~StageClassifier() = default;
  virtual Decision decide(const StageQuery& q, const FeatureVector& x) = 0;
  /// When false the detector skips feature extraction and passes an empty vector.
  virtual bool wants_features() const { return true; }
  /// Asked after a negative onset decision; true runs the reparandum search
  /// as an observation only.
  virtual bool wants_probe(std::size_t /*n*/) { return false; }
  virtual void observe(const StageQuery& /*q*/, const FeatureVector& /*x*/) {}
};

struct ForestSet {
  std::array<Forest, kStageCount> forests;

  const Forest& at(Stage s) const { return forests[static_cast<std::size_t>(s)]; }
  Forest& at(Stage s) { return forests[static_cast<std::size_t>(s)]; }
};

/// Classifies with the per-stage forests. Checks every forest's stage and
/// feature manifest, and that they share one provenance.
class ForestClassifier : public StageClassifier {
 public:
  explicit ForestClassifier(const ForestSet& forests);
  Decision decide(const StageQuery& q, const FeatureVector& x) override;

 private:
  const ForestSet& forests_;
};

/// Decisions from a lookup table; anything not scripted is negative.
class ScriptedClassifier : public StageClassifier {
 public:
  /// For rp_end the key uses target = candidate end (or rp_start for the
  /// zero-length outcome) and the hypothesis's rm_start.
  void set(Stage s, std::size_t n, std::size_t target, bool positive, double score = 1.0,
           std::size_t rm_start = 0, bool zero_length = false);
  Decision decide(const StageQuery& q, const FeatureVector& x) override;
  bool wants_features() const override { return false; }

 private:
  using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, bool>;
  std::map<Key, Decision> table_;
};

/// Answers from the gold annotation and records every query as a labeled
/// example. Optionally probes the reparandum search at a fraction of
/// negative onsets to collect extra rm_start negatives.
class GoldOracle : public StageClassifier {
 public:
  GoldOracle(const Utterance& u, std::array<Dataset*, kStageCount> sinks, double probe_rate = 0.0,
             std::uint64_t seed = 1);
  Decision decide(const StageQuery& q, const FeatureVector& x) override;
  bool wants_features() const override { return any_sink_; }
  bool wants_probe(std::size_t n) override;
  void observe(const StageQuery& q, const FeatureVector& x) override;

  bool gold(const StageQuery& q) const;

 private:
  void record(const StageQuery& q, const FeatureVector& x, bool label);

  const Utterance& u_;
  GoldLabels labels_;
  std::array<Dataset*, kStageCount> sinks_;
  bool any_sink_ = false;
  double probe_rate_;
  std::uint64_t state_;
};

struct DetectorConfig {
  std::size_t capacity = 1;  // hypotheses kept per onset: 1 or 2
  double revisit_low = 0.25;  // w_{n-1} is re-tested when its edit score fell in
  double revisit_high = 0.5;  // [revisit_low, revisit_high)
};

struct StepResult {
  std::size_t index = 0;
  std::vector<LabelEdit> edits;
  std::size_t classifications = 0;  // forest invocations for this word
  std::size_t rm_evaluations = 0;   // (rm_start, rp_start) pairs tested
  LabelState state;                 // snapshot after the step
  std::vector<std::pair<std::size_t, std::size_t>> asserted;  // (rm_start, rp_start) in output
};

/// Strongly incremental repair detector. One utterance per instance.
class Detector {
 public:
  Detector(const LmSet& lms, StageClassifier& classifier, DetectorConfig config = {});

  /// Consumes the token at the current position; returns the edit script.
  StepResult consume(const Token& t);

  std::size_t position() const { return dag_.size(); }
  const LabelState& state() const { return state_; }
  const PrefixDag& dag() const { return dag_; }
  const std::vector<RepairHypothesis>& stack() const { return stack_; }
  const std::vector<RepairHypothesis>& committed() const { return committed_; }
  std::size_t classifications() const { return classifications_; }
  std::size_t rm_evaluations() const { return rm_evaluations_; }

 private:
  Decision ask(const StageQuery& q, const FeatureVector& x, StepResult& step);
  FeatureVector features(Stage s, const StageQuery& q) const;
  void edit_stage(std::size_t n, StepResult& step, bool& is_edit);
  void onset_stage(std::size_t n, StepResult& step);
  void end_stage(std::size_t n, StepResult& step);
  void expire(std::size_t n);
  void cancel_if(const std::function<bool(const RepairHypothesis&)>& pred);
  void close(RepairHypothesis& h, std::size_t end, bool zero_length);
  void add_tags(LabelState& s, const RepairHypothesis& h) const;
  LabelState desired() const;

  LmSet lms_;
  StageClassifier& classifier_;
  DetectorConfig config_;
  PrefixDag dag_;
  LabelState state_;
  std::vector<double> edit_scores_;
  std::vector<bool> revisited_;
  std::vector<RepairHypothesis> stack_;
  std::vector<RepairHypothesis> committed_;
  std::size_t next_id_ = 0;
  std::size_t classifications_ = 0;
  std::size_t rm_evaluations_ = 0;
};

/// Search-space cap: sum over positions 1..n of min(position, 7), times capacity.
std::size_t hypothesis_count_bound(std::size_t n, std::size_t capacity = 1);

/// Runs a fresh detector over an utterance.
std::vector<StepResult> run_detector(const LmSet& lms, StageClassifier& classifier,
                                     const Utterance& u, DetectorConfig config = {});

}  // namespace stir

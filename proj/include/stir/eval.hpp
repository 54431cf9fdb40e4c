#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stir/corpus.hpp"
#include "stir/pipeline.hpp"

namespace stir {

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  /// A zero denominator was hit. With no gold and no hypothesized positives
  /// f is reported as 1.
  bool undefined = false;
};

FScore f_score(std::size_t tp, std::size_t fp, std::size_t fn);

/// Micro-averaged F over rm-tagged words. Outer vectors are utterances.
FScore f_score_rm(const std::vector<GoldLabels>& gold, const std::vector<LabelState>& hyp);
/// Micro F over (word, coarse class) pairs for the rm, ed and rp classes.
FScore f_score_structure(const std::vector<GoldLabels>& gold, const std::vector<LabelState>& hyp);

inline constexpr std::size_t kDelays = 6;

struct DelayedAccuracy {
  std::array<double, kDelays> curve{};  // curve[d-1]: rm F of word t-d in snapshot t
  double mean = 0.0;
};

/// `history[u][t]` is the label state after consuming word t of utterance u.
DelayedAccuracy delayed_accuracy(const std::vector<GoldLabels>& gold,
                                 const std::vector<std::vector<LabelState>>& history);

struct CoarseEdit {
  LabelEdit::Op op = LabelEdit::Op::Add;
  std::size_t index = 0;
  std::optional<TagClass> cls;  // nullopt: fluent add

  friend bool operator==(const CoarseEdit&, const CoarseEdit&) = default;
};

/// Projects each step's tag edits onto the rm/ed/rp classes by replaying the
/// log: a class is added or revoked when the word gains its first or loses
/// its last tag of that class. Fluent adds pass through.
std::vector<std::vector<CoarseEdit>> coarse_edit_log(const std::vector<std::vector<LabelEdit>>& log);

struct EditOverhead {
  std::size_t total = 0;
  std::size_t unnecessary = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(unnecessary) / total; }
  EditOverhead& operator+=(const EditOverhead& o) {
    total += o.total;
    unnecessary += o.unnecessary;
    return *this;
  }
};

/// An edit at step t is necessary iff it belongs to the minimal script from
/// the running necessary state to the coarse incremental gold at t.
EditOverhead edit_overhead(const std::vector<std::vector<CoarseEdit>>& log,
                           const std::vector<GoldLabels>& incremental_gold);

struct TimeToDetection {
  std::optional<double> td_rm;
  std::optional<double> td_rp;
  std::size_t detected = 0;
};

/// `asserted[u][t]` lists the (rm_start, rp_start) pairs in the output after
/// word t. A gold repair counts from the first step that asserts its pair.
TimeToDetection time_to_detection(
    const std::vector<Utterance>& gold,
    const std::vector<std::vector<std::vector<std::pair<std::size_t, std::size_t>>>>& asserted);

double processing_overhead(std::size_t classifications, std::size_t words);

struct MetricsReport {
  double f_rm = 0.0;
  double f_s = 0.0;
  double da = 0.0;
  std::array<double, kDelays> da_curve{};
  double eo = 0.0;
  double po = 0.0;
  std::optional<double> td_rm;
  std::optional<double> td_rp;
  double ts = 1.0;
  FScore rm;  // detail behind f_rm
  FScore s;
  EditOverhead eo_counts;
  std::size_t words = 0;
  std::size_t classifications = 0;
};

/// All metrics for one detector setting. `runs[u]` is the step log of
/// utterance u. ts is left at 1; use total_score across settings.
MetricsReport evaluate(const std::vector<Utterance>& gold,
                       const std::vector<std::vector<StepResult>>& runs);

/// Mean over F_rm, F_s, DA, EO and PO of each metric relative to the best
/// setting. EO and PO are lower-is-better: best/value, capped at 1.
std::vector<double> total_score(const std::vector<MetricsReport>& reports);

/// Fills every report's ts from total_score.
void assign_total_scores(std::vector<MetricsReport>& reports);

struct BestRows {
  std::size_t f_rm = 0, f_s = 0, da = 0, eo = 0, po = 0, ts = 0;
};

/// Index of the best setting per metric; ties go to the earlier setting.
BestRows best_rows(const std::vector<MetricsReport>& reports);

/// Table with one row per best-of-metric setting.
void write_report_table(std::ostream& out, const std::vector<std::string>& names,
                        const std::vector<MetricsReport>& reports);
/// key=value lines.
void write_report_kv(std::ostream& out, const MetricsReport& r);

}  // namespace stir

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "stir/dag.hpp"
#include "stir/features.hpp"
#include "stir/pipeline.hpp"
#include "stir/ranking.hpp"
#include "stir/synth.hpp"
#include "stir/training.hpp"

using namespace stir;

namespace {

const std::vector<Utterance>& train_corpus() {
  static const std::vector<Utterance> c = [] {
    SynthConfig cfg;
    cfg.n_utts = 2000;
    cfg.seed = 5;
    return generate_synthetic(cfg);
  }();
  return c;
}

const LanguageModels& lms() {
  static const LanguageModels m = train_language_models(train_corpus());
  return m;
}

PrefixDag dag_of(const std::string& markup) {
  const Utterance u = parse_utterance(markup);
  PrefixDag dag(lms().set());
  for (const auto& t : u.tokens) {
    dag.append(t);
    dag.compute_values(t.index);
  }
  return dag;
}

struct Seen {
  StageQuery q;
  FeatureVector x;
  bool gold = false;
};

// Gold decisions, keeping every queried feature vector.
class Recorder : public StageClassifier {
 public:
  Recorder(const Utterance& u, double probe_rate, std::vector<Seen>& out)
      : oracle_(u, {&scratch_[0], &scratch_[1], &scratch_[2], &scratch_[3]}, probe_rate, 3),
        out_(out) {}
  Decision decide(const StageQuery& q, const FeatureVector& x) override {
    out_.push_back({q, x, oracle_.gold(q)});
    return oracle_.decide(q, x);
  }
  bool wants_probe(std::size_t n) override { return oracle_.wants_probe(n); }
  void observe(const StageQuery& q, const FeatureVector& x) override {
    out_.push_back({q, x, oracle_.gold(q)});
    oracle_.observe(q, x);
  }

 private:
  std::array<Dataset, kStageCount> scratch_{Dataset(Stage::Edit), Dataset(Stage::RpStart),
                                            Dataset(Stage::RmStart), Dataset(Stage::RpEnd)};
  GoldOracle oracle_;
  std::vector<Seen>& out_;
};

std::vector<Seen> record(const std::vector<Utterance>& corpus, double probe_rate) {
  std::vector<Seen> out;
  for (const auto& u : corpus) {
    Recorder r(u, probe_rate, out);
    run_detector(lms().set(), r, u);
  }
  return out;
}

const std::vector<Utterance>& test_corpus() {
  static const std::vector<Utterance> c = [] {
    SynthConfig cfg;
    cfg.n_utts = 600;
    cfg.seed = 77;
    cfg.repair_rate = 0.5;
    return generate_synthetic(cfg);
  }();
  return c;
}

void check_total(const FeatureVector& v) {
  REQUIRE(v.size() == feature_names(v.stage).size());
  for (double x : v.values) CHECK(std::isfinite(x));
}

}  // namespace

TEST_CASE("feature name lists are frozen") {
  CHECK(feature_names(Stage::Edit).size() == 7);
  CHECK(feature_names(Stage::RpStart).size() == 23);
  CHECK(feature_names(Stage::RmStart).size() == 32);
  CHECK(feature_names(Stage::RpEnd).size() == 23);
  for (Stage s : {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd}) {
    auto names = feature_names(s);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    CHECK(stage_from_string(to_string(s)) == s);
  }
  const auto& rp = feature_names(Stage::RpStart);
  for (const char* n : {"s^lex", "WML^pos", "DeltaWML^lex", "BestWMLBoost^pos", "H^lex",
                        "InformationGain^pos", "DeltaH^lex", "BestEntropyReduce^lex", "w_i-3=w_i",
                        "POS_i-1=POS_i", "edit"})
    CHECK(std::find(rp.begin(), rp.end(), n) != rp.end());
}

TEST_CASE("manifest round trip and mismatch") {
  for (Stage s : {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd}) {
    std::stringstream m;
    write_manifest(m, s);
    CHECK(m.str().rfind("# stir feature manifest v1\n", 0) == 0);
    CHECK_NOTHROW(check_manifest(m, s));
  }
  std::stringstream other;
  write_manifest(other, Stage::RpEnd);
  CHECK_THROWS_AS(check_manifest(other, Stage::RpStart), std::runtime_error);

  auto names = feature_names(Stage::RmStart);
  std::swap(names[0], names[1]);
  CHECK_THROWS_AS(check_manifest(Stage::RmStart, names), std::runtime_error);
  names = feature_names(Stage::RmStart);
  names.pop_back();
  CHECK_THROWS_AS(check_manifest(Stage::RmStart, names), std::runtime_error);

  std::stringstream bad("# something else\nstage edit\n");
  CHECK_THROWS_AS(check_manifest(bad, Stage::Edit), std::runtime_error);
}

TEST_CASE("edit features separate fillers from content words") {
  const NGramModel& edit = lms().edit;
  const NGramModel& lex = lms().lex;

  const PrefixDag uh = dag_of("i/PRP saw/VBD uh/UH");
  const FeatureVector v = edit_features(uh, 2, false);
  check_total(v);
  CHECK(v.get("s_edit") < v.get("s_lex"));
  const std::vector<std::string> bos{"<s>"};
  CHECK(v.get("s_edit") == doctest::Approx(bits(edit.prob("uh", bos))).epsilon(1e-12));
  CHECK(v.get("s_lex") == doctest::Approx(surprisal(lex, "i", "saw", "uh")).epsilon(1e-12));
  CHECK(v.get("s_diff") == doctest::Approx(v.get("s_lex") - v.get("s_edit")));
  CHECK(v.get("is_revisit") == 0.0);

  const PrefixDag the = dag_of("i/PRP saw/VBD the/DT");
  const FeatureVector c = edit_features(the, 2, false);
  CHECK(c.get("s_lex") < c.get("s_edit"));

  const FeatureVector r = edit_features(uh, 2, true);
  check_total(r);
  CHECK(r.get("is_revisit") == 1.0);
  CHECK_THROWS_AS(edit_features(uh, 3, false), std::out_of_range);
  CHECK_THROWS_AS(edit_features(uh, 0, true), std::out_of_range);
}

TEST_CASE("utterance-initial vectors are complete") {
  const PrefixDag d = dag_of("john/NNP");
  const FeatureVector e = edit_features(d, 0, false);
  check_total(e);
  CHECK(e.get("other_s_edit") == 0.0);
  const FeatureVector r = rp_start_features(d, 0);
  check_total(r);
  CHECK(r.get("w_i-1=w_i") == 0.0);
  CHECK(r.get("edit") == 0.0);
  CHECK(r.get("BestWMLBoost^lex") == 0.0);
}

TEST_CASE("rp_start values match direct LM queries") {
  const NGramModel& lex = lms().lex;
  const PrefixDag d = dag_of("john/NNP likes/VBZ likes/VBZ");
  const FeatureVector v = rp_start_features(d, 2);
  check_total(v);
  CHECK(v.get("w_i-1=w_i") == 1.0);
  CHECK(v.get("POS_i-1=POS_i") == 1.0);
  CHECK(v.get("w_i-2=w_i") == 0.0);
  CHECK(v.get("s^lex") == doctest::Approx(surprisal(lex, "john", "likes", "likes")).epsilon(1e-12));
  const double wml_prev = wml(lex, "<s>", "john", "likes");
  const double wml_here = wml(lex, "john", "likes", "likes");
  CHECK(v.get("WML^lex") == doctest::Approx(wml_here).epsilon(1e-12));
  CHECK(v.get("DeltaWML^lex") == doctest::Approx(wml_prev - wml_here).epsilon(1e-12));
  CHECK(v.get("H^lex") == doctest::Approx(entropy(lex, "likes", "likes")).epsilon(1e-9));
  CHECK(v.get("InformationGain^lex") ==
        doctest::Approx(entropy(lex, "john", "likes") - v.get("s^lex")).epsilon(1e-9));
  CHECK(v.get("DeltaH^lex") ==
        doctest::Approx(entropy(lex, "john", "likes") - v.get("H^lex")).epsilon(1e-9));
}

TEST_CASE("Best features scan only the available positions") {
  // At i = 1 only c = 0 exists, so the best boost is that single boost.
  const PrefixDag two = dag_of("likes/VBZ likes/VBZ");
  const FeatureVector v = rp_start_features(two, 1);
  for (Model m : {Model::Lex, Model::Pos}) {
    const std::string name = m == Model::Lex ? "BestWMLBoost^lex" : "BestWMLBoost^pos";
    CHECK(v.get(name) == doctest::Approx(wml_boost(two, m, 1, 0)).epsilon(1e-12));
  }
  const PrefixDag d = dag_of("i/PRP saw/VBD the/DT the/DT dog/NN");
  for (std::size_t n = 1; n < d.size(); ++n) {
    const FeatureVector f = rp_start_features(d, n);
    const std::size_t lo = n >= kBestScan ? n - kBestScan : 0;
    for (std::size_t c = lo; c < n; ++c) {
      CHECK(f.get("BestWMLBoost^lex") >= wml_boost(d, Model::Lex, n, c) - 1e-12);
      CHECK(f.get("BestWMLBoost^pos") >= wml_boost(d, Model::Pos, n, c) - 1e-12);
    }
  }
}

TEST_CASE("fluency drops at synthetic repair onsets") {
  double onset = 0, fluent = 0;
  std::size_t n_onset = 0, n_fluent = 0;
  for (const auto& s : record(test_corpus(), 0.0)) {
    if (s.q.stage != Stage::RpStart) continue;
    check_total(s.x);
    const double d = s.x.get("DeltaWML^lex");
    if (s.gold) {
      onset += d;
      ++n_onset;
    } else {
      fluent += d;
      ++n_fluent;
    }
  }
  REQUIRE(n_onset > 100);
  REQUIRE(n_fluent > 100);
  onset /= static_cast<double>(n_onset);
  fluent /= static_cast<double>(n_fluent);
  CHECK(onset > 0.0);
  CHECK(onset > fluent);
}

TEST_CASE("rm_start features for a repeat repair") {
  const PrefixDag d = dag_of("john/NNP likes/VBZ likes/VBZ mary/NNP");
  const FeatureVector v = rm_start_features(d, 2, 1);
  check_total(v);
  CHECK(v.get("w_rm=w_rp") == 1.0);
  CHECK(v.get("POS_rm=POS_rp") == 1.0);
  CHECK(v.get("KL^pos") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("KL^lex") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("distance") == 1.0);
  CHECK(v.get("rm_length") == 1.0);
  CHECK(v.get("utterance_start") == 0.0);
  CHECK(v.get("WMLboost^lex") == doctest::Approx(wml_boost(d, Model::Lex, 2, 1)).epsilon(1e-12));

  const FeatureVector far = rm_start_features(d, 2, 0);
  CHECK(far.get("utterance_start") == 1.0);
  CHECK(far.get("w_rm+1=w_rp") == 1.0);
}

TEST_CASE("rm_start window bounds") {
  const PrefixDag d = dag_of("a/DT b/NN c/NN d/NN e/NN f/NN g/NN h/NN i/NN j/NN");
  CHECK_NOTHROW(rm_start_features(d, 8, 1));
  CHECK_THROWS_AS(rm_start_features(d, 8, 0), std::out_of_range);
  CHECK_THROWS_AS(rm_start_features(d, 3, 3), std::out_of_range);
  CHECK_THROWS_AS(rm_start_features(d, 3, 4), std::out_of_range);
  CHECK_THROWS_AS(rm_start_features(d, 10, 5), std::out_of_range);
}

TEST_CASE("excising a reparandum boosts fluency") {
  double rm = 0, other = 0;
  std::size_t n_rm = 0, n_other = 0;
  for (const auto& s : record(test_corpus(), 1.0)) {
    if (s.q.stage != Stage::RmStart) continue;
    check_total(s.x);
    const double b = s.x.get("WMLboost^lex");
    if (s.gold) {
      rm += b;
      ++n_rm;
    } else {
      other += b;
      ++n_other;
    }
  }
  REQUIRE(n_rm > 100);
  REQUIRE(n_other > 100);
  CHECK(rm / static_cast<double>(n_rm) > 0.0);
  CHECK(rm / static_cast<double>(n_rm) > other / static_cast<double>(n_other));
}

TEST_CASE("rp_end features for repeats and substitutions") {
  const PrefixDag rep = dag_of("i/PRP saw/VBD the/DT saw/VBD the/DT man/NN");
  const FeatureVector v = rp_end_features(rep, {1, 3}, 4, false);
  check_total(v);
  CHECK(v.get("KL^lex") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("KL^pos") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("ReparandumRepairDifference^lex") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("ReparandumRepairDifference^pos") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.get("rp_length") == 2.0);
  CHECK(v.get("rm_length") == 2.0);
  CHECK(v.get("w_e=w_rm_end") == 1.0);
  CHECK(v.get("copy_fraction") == 1.0);

  const FeatureVector z = rp_end_features(rep, {1, 3}, 0, true);
  check_total(z);
  CHECK(z.get("zero_length") == 1.0);
  CHECK(z.get("rp_length") == 0.0);

  CHECK_THROWS_AS(rp_end_features(rep, {1, 3}, 2, false), std::out_of_range);
  CHECK_THROWS_AS(rp_end_features(rep, {1, 3}, 6, false), std::out_of_range);
  CHECK_THROWS_AS(rp_end_features(rep, {3, 3}, 3, false), std::out_of_range);
  CHECK_THROWS_AS(rp_end_features(rep, {0, 8}, 8, false), std::out_of_range);
}

TEST_CASE("substitutions diverge at their ends") {
  std::size_t subs = 0, positive_kl = 0;
  for (const auto& u : test_corpus()) {
    PrefixDag d(lms().set());
    for (const auto& t : u.tokens) {
      d.append(t);
      d.compute_values(t.index);
    }
    for (const auto& r : u.repairs) {
      if (r.kind != RepairKind::Substitute) continue;
      ++subs;
      const FeatureVector v = rp_end_features(d, {r.rm_start, r.rp_start}, r.rp_end, false);
      CHECK(v.get("KL^lex") >= 0.0);
      positive_kl += v.get("KL^lex") > 1e-9;
    }
  }
  REQUIRE(subs > 20);
  CHECK(positive_kl * 2 > subs);
}

TEST_CASE("information gain ranking") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset d(std::vector<std::string>{"noise", "label_copy", "weak"});
  for (int i = 0; i < 2000; ++i) {
    const bool y = unif(rng) < 0.3;
    d.add({unif(rng), y ? 1.0 : 0.0, (y ? 0.2 : 0.0) + unif(rng)}, y);
  }
  const double p = static_cast<double>(d.positives()) / static_cast<double>(d.rows());
  const double h = -(p * std::log2(p) + (1 - p) * std::log2(1 - p));
  const auto ig = information_gain(d);
  CHECK(ig[1] == doctest::Approx(h).epsilon(1e-9));
  CHECK(ig[0] < 0.01);

  const Ranking r = information_gain_ranking(d, 10, 3);
  REQUIRE(r.features.size() == 3);
  CHECK_FALSE(r.single_class);
  CHECK(r.features[0].name == "label_copy");
  CHECK(r.features[0].rank == 1.0);
  CHECK(r.features[0].rank_sd == 0.0);
  CHECK(r.features[2].name == "noise");
  for (const auto& f : r.features) {
    CHECK(f.merit >= 0.0);
    CHECK(f.rank >= 1.0);
  }

  // Same data with columns reversed ranks the same.
  Dataset rev(std::vector<std::string>{"weak", "label_copy", "noise"});
  for (std::size_t i = 0; i < d.rows(); ++i)
    rev.add({d.at(i, 2), d.at(i, 1), d.at(i, 0)}, d.y[i] != 0);
  const Ranking rr = information_gain_ranking(rev, 10, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rr.features[k].name == r.features[k].name);
    CHECK(rr.features[k].merit == doctest::Approx(r.features[k].merit).epsilon(1e-12));
  }
}

TEST_CASE("injected DeltaWML is ranked first") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d(Stage::RpStart);
  const auto& names = feature_names(Stage::RpStart);
  const auto target = std::find(names.begin(), names.end(), "DeltaWML^lex") - names.begin();
  for (int i = 0; i < 1500; ++i) {
    const bool y = i % 5 == 0;
    std::vector<double> row(names.size());
    for (auto& x : row) x = noise(rng);
    row[static_cast<std::size_t>(target)] = (y ? 3.0 : 0.0) + 0.3 * noise(rng);
    d.add(row, y);
  }
  const Ranking r = information_gain_ranking(d, 10, 1);
  CHECK(r.features[0].name == "DeltaWML^lex");
  CHECK(r.features[0].rank == 1.0);
  CHECK(r.features[0].rank_sd == 0.0);
}

TEST_CASE("single-class ranking yields zero merits") {
  Dataset d(std::vector<std::string>{"a", "b"});
  for (int i = 0; i < 50; ++i) d.add({static_cast<double>(i), 1.0}, false);
  const Ranking r = information_gain_ranking(d, 5, 1);
  CHECK(r.single_class);
  for (const auto& f : r.features) CHECK(f.merit == 0.0);
}

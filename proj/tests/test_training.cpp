#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stir/eval.hpp"
#include "stir/synth.hpp"
#include "stir/training.hpp"

using namespace stir;
namespace fs = std::filesystem;

namespace {

std::vector<Utterance> corpus(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_utts = n;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

TrainOptions quick() {
  TrainOptions o;
  o.folds = 3;
  o.seed = 4;
  return o;
}

const Bundle& bundle() {
  static const Bundle b = train_bundle(corpus(400, 2), quick());
  return b;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stir_training_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

MetricsReport run(const Bundle& b, const std::vector<Utterance>& test) {
  ForestClassifier c(b.forests);
  std::vector<std::vector<StepResult>> runs;
  for (const auto& u : test) runs.push_back(run_detector(b.lms.set(), c, u));
  return evaluate(test, runs);
}

}  // namespace

TEST_CASE("language models and their errors") {
  const auto c = corpus(200, 1);
  const LanguageModels m = train_language_models(c);
  CHECK(m.lex.order() == 3);
  CHECK(m.pos.order() == 3);
  CHECK(m.edit.order() == 2);
  CHECK(m.provenance().rfind("lex=", 0) == 0);
  CHECK(m.provenance() == train_language_models(c).provenance());
  CHECK(m.provenance() != train_language_models(corpus(200, 9)).provenance());

  CHECK_THROWS_AS(train_language_models({parse_utterance("a/DT b/NN")}), std::invalid_argument);
  CHECK_THROWS_AS(train_language_models({}), std::invalid_argument);
}

TEST_CASE("cross-fold examples") {
  const auto c = corpus(60, 3);
  CHECK_THROWS_AS(cross_fold_examples(c, 1, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(cross_fold_examples(c, 61, 0.2, 1), std::invalid_argument);
  const StageDatasets a = cross_fold_examples(c, 3, 0.2, 1);
  const StageDatasets b = cross_fold_examples(c, 3, 0.2, 1);
  for (std::size_t s = 0; s < kStageCount; ++s) {
    CHECK(a[s].rows() > 0);
    CHECK(a[s].names == feature_names(static_cast<Stage>(s)));
    CHECK(a[s].x == b[s].x);
    CHECK(a[s].y == b[s].y);
  }
  // One edit example per word.
  std::size_t words = 0;
  for (const auto& u : c) words += u.size();
  CHECK(a[0].rows() >= words);
  // Probing adds rm_start negatives only.
  const StageDatasets none = cross_fold_examples(c, 3, 0.0, 1);
  CHECK(none[2].positives() == a[2].positives());
  CHECK(none[2].rows() < a[2].rows());
}

TEST_CASE("bundle forests follow the options") {
  const Bundle& b = bundle();
  for (Stage s : {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd}) {
    const Forest& f = b.forests.at(s);
    CHECK(f.stage() == s);
    CHECK(f.provenance() == b.lms.provenance());
    CHECK(f.cost() == b.options.costs[static_cast<std::size_t>(s)]);
    CHECK(f.params().seed == stage_seed(4, s));
    if (!f.degenerate()) {
      CHECK(f.trees().size() == 20);
      for (const auto& t : f.trees()) CHECK(t.depth() <= 4);
    }
  }
  const auto d = TrainOptions::default_costs();
  CHECK(d[0].fn_cost == 1.0);
  CHECK(d[1].fn_cost == 8.0);
  CHECK(d[2].fn_cost == 4.0);
  CHECK(d[3].fn_cost == 4.0);
}

TEST_CASE("save is byte-identical and load round trips") {
  const fs::path a = scratch("a"), b = scratch("b");
  save_bundle(bundle(), a);
  save_bundle(train_bundle(corpus(400, 2), quick()), b);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 3 + 3 * kStageCount + 1);

  const Bundle loaded = load_bundle(a, true);
  CHECK(loaded.lms.provenance() == bundle().lms.provenance());
  CHECK(loaded.options.folds == 3);
  for (std::size_t s = 0; s < kStageCount; ++s) CHECK(loaded.examples[s].y == bundle().examples[s].y);

  const auto test = corpus(100, 77);
  std::ostringstream x, y;
  write_report_kv(x, run(bundle(), test));
  write_report_kv(y, run(loaded, test));
  CHECK(x.str() == y.str());

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("load rejects mismatched parts") {
  const fs::path dir = scratch("mismatch");
  save_bundle(bundle(), dir);

  SUBCASE("language model from another corpus") {
    const LanguageModels other = train_language_models(corpus(100, 5));
    std::ofstream out(dir / "lex.ngram", std::ios::binary);
    other.lex.save(out);
    out.close();
    CHECK_THROWS_AS(load_bundle(dir), std::runtime_error);
  }
  SUBCASE("forest with the wrong stage") {
    fs::copy_file(dir / "forest_edit.txt", dir / "forest_rp_start.txt",
                  fs::copy_options::overwrite_existing);
    CHECK_THROWS_AS(load_bundle(dir), std::runtime_error);
  }
  SUBCASE("edited manifest") {
    std::string m = slurp(dir / "manifest_rm_start.txt");
    m.replace(m.find("KL^pos"), 6, "KL^xyz");
    std::ofstream(dir / "manifest_rm_start.txt", std::ios::binary) << m;
    CHECK_THROWS_AS(load_bundle(dir), std::runtime_error);
  }
  SUBCASE("missing bundle.json") {
    fs::remove(dir / "bundle.json");
    CHECK_THROWS(load_bundle(dir));
  }
  fs::remove_all(dir);
}

TEST_CASE("trained detector beats chance on held-out data") {
  const MetricsReport r = run(bundle(), corpus(200, 123));
  CHECK(r.f_rm > 0.5);
  CHECK(r.po >= 1.0);
  CHECK(r.eo <= 1.0);
}

#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "stir/forest.hpp"

using namespace stir;

namespace {

// Edit-stage shaped data: label is s_diff > 0, the rest is noise.
Dataset separable(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset d(Stage::Edit);
  for (std::size_t i = 0; i < rows; ++i) {
    const bool y = i % 4 == 0;
    std::vector<double> row(d.cols());
    for (auto& x : row) x = g(rng);
    row[2] = y ? 2.0 + std::abs(g(rng)) : -2.0 - std::abs(g(rng));
    d.add(row, y);
  }
  return d;
}

Dataset reference() {
  std::ifstream in(std::string(STIR_TEST_DATA) + "/rp_start_reference.tsv");
  REQUIRE(in);
  return read_dataset(in);
}

double recall(const Forest& f, const Dataset& d) {
  std::size_t tp = 0, pos = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (!d.y[i]) continue;
    ++pos;
    tp += f.classify(d.row(i), d.cols()).positive;
  }
  return static_cast<double>(tp) / static_cast<double>(pos);
}

std::string save(const Forest& f) {
  std::ostringstream out;
  f.save(out);
  return out.str();
}

}  // namespace

TEST_CASE("forest structure and MetaCost instrumentation") {
  const Dataset d = separable(400, 1);
  const Forest f = train_forest(Stage::Edit, d, {4.0, 1.0}, {});
  CHECK_FALSE(f.degenerate());
  CHECK(f.trees().size() == 20);
  for (const auto& t : f.trees()) {
    CHECK(t.depth() <= 4);
    for (const auto& n : t.nodes) {
      if (n.feature < 0) continue;
      CHECK(n.feature < static_cast<std::int32_t>(d.cols()));
      CHECK(n.left > 0);
      CHECK(n.right > 0);
    }
  }
  CHECK(f.metacost().iterations == 10);
  REQUIRE(f.metacost().resample_sizes.size() == 10);
  for (auto m : f.metacost().resample_sizes) CHECK(m == 100);
  CHECK(f.metacost().training_rows == 400);
  CHECK(f.manifest() == feature_names(Stage::Edit));
}

TEST_CASE("depth bound holds on hard data") {
  const Dataset d = reference();
  ForestParams p;
  p.max_depth = 2;
  const auto trees = train_random_forest(d, p, 5);
  CHECK(trees.size() == 20);
  for (const auto& t : trees) CHECK(t.depth() <= 2);
}

TEST_CASE("separable data is learned exactly") {
  const Dataset train = separable(400, 1);
  const Dataset test = separable(200, 2);
  const Forest f = train_forest(Stage::Edit, train, {1.0, 1.0}, {});
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto c = f.classify(test.row(i), test.cols());
    CHECK(c.positive == (test.y[i] != 0));
  }
}

TEST_CASE("training is deterministic per seed") {
  const Dataset d = reference();
  ForestParams p;
  p.seed = 9;
  CHECK(save(train_forest(Stage::RpStart, d, {8.0, 1.0}, p)) ==
        save(train_forest(Stage::RpStart, d, {8.0, 1.0}, p)));
  ForestParams q = p;
  q.seed = 10;
  CHECK(save(train_forest(Stage::RpStart, d, {8.0, 1.0}, p)) !=
        save(train_forest(Stage::RpStart, d, {8.0, 1.0}, q)));
}

TEST_CASE("held-out recall does not fall as the miss cost rises") {
  const Dataset d = reference();
  CHECK(d.positives() * 20 < d.rows());
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < d.rows(); ++i) (i % 3 == 0 ? test_rows : train_rows).push_back(i);
  const Dataset train = d.subset(train_rows);
  const Dataset test = d.subset(test_rows);
  double last = -1.0;
  std::size_t last_relabeled = 0, last_dropped = d.rows();
  for (double fn : {1.0, 2.0, 8.0, 64.0}) {
    const Forest f = train_forest(Stage::RpStart, train, {fn, 1.0}, {});
    const double r = recall(f, test);
    CAPTURE(fn);
    CHECK(r >= last);
    // The vote estimates do not depend on cost, so positive relabeling only grows.
    CHECK(f.metacost().relabeled_positive >= last_relabeled);
    CHECK(f.metacost().relabeled_negative <= last_dropped);
    last = r;
    last_relabeled = f.metacost().relabeled_positive;
    last_dropped = f.metacost().relabeled_negative;
  }
}

TEST_CASE("an even vote goes negative") {
  const Forest trained = train_forest(Stage::Edit, separable(100, 3), {1.0, 1.0}, {});
  std::string text = save(trained);
  text.erase(text.find("trees "));
  std::ostringstream trees;
  trees << "trees 20\n";
  for (int t = 0; t < 20; ++t) trees << "tree 1\n-1 0 -1 -1 " << (t < 10 ? 1 : 0) << '\n';
  trees << "end\n";
  std::istringstream in(text + trees.str());
  const Forest f = Forest::load(in);
  const std::vector<double> x(7, 0.0);
  const auto c = f.classify(x.data(), x.size());
  CHECK(c.score == 0.5);
  CHECK_FALSE(c.positive);
}

TEST_CASE("save and load round trip") {
  const Dataset d = reference();
  Forest f = train_forest(Stage::RpStart, d, {8.0, 1.0}, {});
  f.set_provenance("lex=1 pos=2 edit=3");
  const std::string text = save(f);
  std::istringstream in(text);
  const Forest g = Forest::load(in);
  CHECK(save(g) == text);
  CHECK(g.provenance() == "lex=1 pos=2 edit=3");
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const auto a = f.classify(d.row(i), d.cols());
    const auto b = g.classify(d.row(i), d.cols());
    CHECK(a.score == b.score);
  }
}

TEST_CASE("manifest and stage mismatches are hard errors") {
  const Forest f = train_forest(Stage::Edit, separable(100, 4), {1.0, 1.0}, {});
  const std::vector<double> short_row(6, 0.0);
  CHECK_THROWS_AS(f.classify(short_row.data(), short_row.size()), std::invalid_argument);
  FeatureVector wrong{Stage::RpStart, std::vector<double>(7, 0.0)};
  CHECK_THROWS_AS(f.classify(wrong), std::invalid_argument);

  std::string text = save(f);
  const auto at = text.find("s_diff\n");
  REQUIRE(at != std::string::npos);
  text.replace(at, 6, "s_difF");
  std::istringstream in(text);
  CHECK_THROWS_AS(Forest::load(in), std::runtime_error);

  Dataset renamed = separable(50, 5);
  renamed.names[0] = "other";
  CHECK_THROWS_AS(train_forest(Stage::Edit, renamed, {1.0, 1.0}, {}), std::runtime_error);
}

TEST_CASE("degenerate and invalid inputs") {
  Dataset one(Stage::Edit);
  for (int i = 0; i < 20; ++i) one.add(std::vector<double>(7, i), false);
  const Forest f = train_forest(Stage::Edit, one, {1.0, 1.0}, {});
  CHECK(f.degenerate());
  const std::vector<double> x(7, 0.0);
  CHECK_FALSE(f.classify(x.data(), x.size()).positive);

  CHECK_THROWS_AS(train_forest(Stage::Edit, Dataset(Stage::Edit), {1.0, 1.0}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_forest(Stage::Edit, separable(20, 1), {-1.0, 1.0}, {}),
                  std::invalid_argument);
  ForestParams bad;
  bad.resample_fraction = 0.0;
  CHECK_THROWS_AS(train_forest(Stage::Edit, separable(20, 1), {1.0, 1.0}, bad),
                  std::invalid_argument);

  std::istringstream garbage("STIR-FOREST 2\n");
  CHECK_THROWS_AS(Forest::load(garbage), std::runtime_error);
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stir/dataset.hpp"
#include "stir/features.hpp"

namespace stir {

/// 2x2 misclassification costs; correct decisions cost nothing.
struct CostMatrix {
  double fn_cost = 1.0;  // missing a positive
  double fp_cost = 1.0;  // false alarm

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;
};

struct ForestParams {
  std::size_t n_trees = 20;
  std::size_t max_depth = 4;
  std::size_t metacost_iterations = 10;
  double resample_fraction = 0.25;
  std::size_t max_bins = 64;  // candidate thresholds per feature
  std::uint64_t seed = 1;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1: leaf
  double threshold = 0.0;     // go left iff x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint8_t label = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::uint8_t predict(const double* x) const;
  std::size_t depth() const;
};

/// What the MetaCost wrapper did, kept for inspection.
struct MetaCostStats {
  std::size_t iterations = 0;
  std::vector<std::size_t> resample_sizes;
  std::size_t training_rows = 0;
  std::size_t relabeled_positive = 0;  // negatives flipped to positive
  std::size_t relabeled_negative = 0;  // positives flipped to negative
};

struct Classification {
  bool positive = false;
  double score = 0.0;  // fraction of trees voting positive
};

class Forest {
 public:
  Forest() = default;

  Stage stage() const { return stage_; }
  const CostMatrix& cost() const { return cost_; }
  const ForestParams& params() const { return params_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<std::string>& manifest() const { return names_; }
  const MetaCostStats& metacost() const { return stats_; }
  /// Single-class training data: every query gets the constant label.
  bool degenerate() const { return degenerate_; }
  std::uint8_t constant_label() const { return constant_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  /// Majority vote; an even split goes to the negative class.
  Classification classify(const FeatureVector& x) const;
  Classification classify(const double* x, std::size_t n) const;

  void save(std::ostream& out) const;
  static Forest load(std::istream& in);

  friend Forest train_forest(Stage stage, const Dataset& data, const CostMatrix& cost,
                             const ForestParams& params);

 private:
  Stage stage_ = Stage::Edit;
  CostMatrix cost_;
  ForestParams params_;
  std::vector<std::string> names_;
  std::vector<Tree> trees_;
  MetaCostStats stats_;
  bool degenerate_ = false;
  std::uint8_t constant_ = 0;
  std::string provenance_;
};

/// Plain bagged random forest: bootstrap rows, ceil(sqrt(d)) candidate
/// features per split, information-gain splits, depth bound.
std::vector<Tree> train_random_forest(const Dataset& data, const ForestParams& params,
                                      std::uint64_t seed);

/// MetaCost: bagged forests on resamples estimate P(positive) per row, each
/// row takes the label with lower expected cost, then the final forest is
/// trained on the relabeled data.
Forest train_forest(Stage stage, const Dataset& data, const CostMatrix& cost,
                    const ForestParams& params);

}  // namespace stir

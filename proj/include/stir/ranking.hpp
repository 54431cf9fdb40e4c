#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stir/dataset.hpp"

namespace stir {

struct RankedFeature {
  std::string name;
  double merit = 0.0;  // mean information gain over folds, bits
  double merit_sd = 0.0;
  double rank = 0.0;  // mean 1-based rank over folds
  double rank_sd = 0.0;
};

struct Ranking {
  std::vector<RankedFeature> features;  // sorted by merit, best first
  bool single_class = false;
};

/// Information gain of every column against the label after equal-frequency
/// discretization into `bins` bins.
std::vector<double> information_gain(const Dataset& d, std::size_t bins = 10);

/// Per-fold information gain on each fold's training portion; mean merit and
/// mean rank over the folds. A single-class dataset yields zero merits.
Ranking information_gain_ranking(const Dataset& d, std::size_t folds, std::uint64_t seed,
                                 std::size_t bins = 10);

}  // namespace stir

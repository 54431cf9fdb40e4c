#include "stir/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "stir/corpus.hpp"

namespace stir {

namespace {

double h2(double a, double b) {
  const double n = a + b;
  double h = 0.0;
  for (double c : {a, b})
    if (c > 0) h -= (c / n) * std::log2(c / n);
  return h;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> information_gain(const Dataset& d, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("information_gain: need at least 2 bins");
  std::vector<double> out(d.cols(), 0.0);
  const std::size_t n = d.rows();
  if (n == 0) return out;
  const double pos = static_cast<double>(d.positives());
  const double base = h2(pos, static_cast<double>(n) - pos);
  if (base == 0.0) return out;
  std::vector<double> col(n);
  for (std::size_t f = 0; f < d.cols(); ++f) {
    for (std::size_t r = 0; r < n; ++r) col[r] = d.at(r, f);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    // upper edges of the equal-frequency bins; equal values share a bin
    std::vector<double> cuts;
    for (std::size_t k = 1; k < bins; ++k) {
      const double v = sorted[(k * n) / bins - ((k * n) % bins == 0 ? 1 : 0)];
      if (v < sorted.back() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
    }
    std::vector<double> bp(cuts.size() + 1, 0.0), bn(cuts.size() + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto b = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), col[r]) - cuts.begin());
      (d.y[r] ? bp : bn)[b] += 1;
    }
    double cond = 0.0;
    for (std::size_t b = 0; b < bp.size(); ++b) {
      const double m = bp[b] + bn[b];
      if (m > 0) cond += (m / static_cast<double>(n)) * h2(bp[b], bn[b]);
    }
    out[f] = std::max(0.0, base - cond);
  }
  return out;
}

Ranking information_gain_ranking(const Dataset& d, std::size_t folds, std::uint64_t seed,
                                 std::size_t bins) {
  if (folds < 2) throw std::invalid_argument("information_gain_ranking: folds must be >= 2");
  if (d.rows() < folds) throw std::invalid_argument("information_gain_ranking: fewer rows than folds");
  Ranking out;
  const std::size_t pos = d.positives();
  out.single_class = pos == 0 || pos == d.rows();
  if (out.single_class)
    std::cerr << "warning: single-class dataset; all information gain merits are 0\n";

  const auto parts = split_fold_indices(d.rows(), folds, seed);
  const std::size_t nf = d.cols();
  std::vector<std::vector<double>> merits(nf), ranks(nf);
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < folds; ++j)
      if (j != k) train.insert(train.end(), parts[j].begin(), parts[j].end());
    std::sort(train.begin(), train.end());
    const auto ig = information_gain(d.subset(train), bins);
    std::vector<std::size_t> order(nf);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (ig[a] != ig[b]) return ig[a] > ig[b];
      return d.names[a] < d.names[b];
    });
    for (std::size_t r = 0; r < nf; ++r) ranks[order[r]].push_back(static_cast<double>(r + 1));
    for (std::size_t f = 0; f < nf; ++f) merits[f].push_back(ig[f]);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    RankedFeature rf;
    rf.name = d.names[f];
    mean_sd(merits[f], rf.merit, rf.merit_sd);
    mean_sd(ranks[f], rf.rank, rf.rank_sd);
    out.features.push_back(rf);
  }
  std::sort(out.features.begin(), out.features.end(), [](const auto& a, const auto& b) {
    if (a.merit != b.merit) return a.merit > b.merit;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.name < b.name;
  });
  return out;
}

}  // namespace stir

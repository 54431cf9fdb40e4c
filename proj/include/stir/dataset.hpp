#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stir/features.hpp"

namespace stir {

/// Row-major labeled feature matrix. Label 1 is the positive stage class.
struct Dataset {
  std::vector<std::string> names;
  std::vector<double> x;
  std::vector<std::uint8_t> y;

  Dataset() = default;
  explicit Dataset(std::vector<std::string> n) : names(std::move(n)) {}
  explicit Dataset(Stage s) : names(feature_names(s)) {}

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return names.size(); }
  const double* row(std::size_t i) const { return x.data() + i * names.size(); }
  double at(std::size_t i, std::size_t j) const { return x[i * names.size() + j]; }

  void add(const std::vector<double>& values, bool label);
  void add(const FeatureVector& v, bool label) { add(v.values, label); }
  void append(const Dataset& other);
  Dataset subset(const std::vector<std::size_t>& rows) const;
  std::size_t positives() const;
};

/// Tab-separated: header "label<TAB>name...", then one row per example with
/// values printed to round-trip exactly.
void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);

}  // namespace stir
